#pragma once

#include <stdexcept>
#include <string>

namespace agentloop {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Backend could not be reached after the configured retries.
struct BackendUnavailable : Error {
    using Error::Error;
};

// Teacher-specific flavor of backend failure; SFT stages report it separately.
struct TeacherUnavailable : BackendUnavailable {
    using BackendUnavailable::BackendUnavailable;
};

// Replay cache has no entry for the request digest.
struct ReplayMiss : Error {
    using Error::Error;
};

// Judge reply could not be parsed into a verdict.
struct MalformedJudgeReply : Error {
    using Error::Error;
};

struct ConfigError : Error {
    using Error::Error;
};

// Advantage normalization needs at least two rewards.
struct DegenerateGroup : Error {
    using Error::Error;
};

struct NonFiniteLoss : Error {
    using Error::Error;
};

struct IllegalRewardComponent : Error {
    using Error::Error;
};

// A sampling stratum cannot meet its quota; message carries achieved counts.
struct InsufficientStratum : Error {
    using Error::Error;
};

struct IoError : Error {
    using Error::Error;
};

}  // namespace agentloop
