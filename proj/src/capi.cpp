#include "agentloop.h"

#include <cstdlib>
#include <cstring>
#include <string>

#include "engine.hpp"
#include "util/errors.hpp"

namespace {

thread_local std::string g_last_error = "no error";

char* copy_string(const std::string& s) {
    char* out = static_cast<char*>(std::malloc(s.size() + 1));
    if (!out) return nullptr;
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

al_status fail(al_status status, const std::string& message) {
    g_last_error = message;
    return status;
}

template <typename Fn>
al_status guarded(Fn&& fn) {
    try {
        fn();
        return AL_OK;
    } catch (const agentloop::ConfigError& e) {
        return fail(AL_ERR_CONFIG, e.what());
    } catch (const agentloop::BackendUnavailable& e) {
        return fail(AL_ERR_BACKEND, e.what());
    } catch (const agentloop::ReplayMiss& e) {
        return fail(AL_ERR_BACKEND, e.what());
    } catch (const agentloop::IoError& e) {
        return fail(AL_ERR_IO, e.what());
    } catch (const nlohmann::json::exception& e) {
        return fail(AL_ERR_CONFIG, std::string("invalid JSON: ") + e.what());
    } catch (const std::exception& e) {
        return fail(AL_ERR_INTERNAL, e.what());
    }
}

void emit(char** out, const nlohmann::json& value) {
    if (out) *out = copy_string(value.dump(2));
}

}  // namespace

extern "C" {

struct al_engine {
    agentloop::Engine impl;
};

const char* al_version(void) {
    return "0.1.0";
}

const char* al_last_error(void) {
    return g_last_error.c_str();
}

al_status al_engine_create(const char* config_json, al_engine** out_engine) {
    if (!config_json || !out_engine) return fail(AL_ERR_INVALID_ARGUMENT, "null argument");
    *out_engine = nullptr;
    return guarded([&] {
        nlohmann::json j = nlohmann::json::parse(config_json);
        *out_engine = new al_engine{agentloop::Engine(agentloop::io::RunConfig::from_json(j))};
    });
}

void al_engine_destroy(al_engine* engine) {
    delete engine;
}

al_status al_engine_run(al_engine* engine, const char* queries_path, const char* out_dir,
                        char** out_summary_json) {
    if (!engine || !queries_path) return fail(AL_ERR_INVALID_ARGUMENT, "null argument");
    return guarded([&] {
        emit(out_summary_json, engine->impl.run(queries_path, out_dir ? out_dir : ""));
    });
}

al_status al_engine_train(al_engine* engine, const char* out_dir, char** out_summary_json) {
    if (!engine) return fail(AL_ERR_INVALID_ARGUMENT, "null argument");
    return guarded([&] { emit(out_summary_json, engine->impl.train(out_dir ? out_dir : "")); });
}

al_status al_engine_build_sft(al_engine* engine, const char* pool_path, const char* out_dir,
                              char** out_summary_json) {
    if (!engine || !pool_path) return fail(AL_ERR_INVALID_ARGUMENT, "null argument");
    return guarded([&] {
        emit(out_summary_json, engine->impl.build_sft(pool_path, out_dir ? out_dir : ""));
    });
}

al_status al_engine_validate_corpus(al_engine* engine, const char* corpus_path,
                                    char** out_report_json) {
    if (!engine || !corpus_path) return fail(AL_ERR_INVALID_ARGUMENT, "null argument");
    return guarded([&] { emit(out_report_json, engine->impl.validate_corpus(corpus_path)); });
}

al_status al_diagnose(const char* trajectories_path, char** out_report_json) {
    if (!trajectories_path) return fail(AL_ERR_INVALID_ARGUMENT, "null argument");
    return guarded([&] { emit(out_report_json, agentloop::Engine::diagnose(trajectories_path)); });
}

void al_string_free(char* s) {
    std::free(s);
}

}  // extern "C"
