#pragma once

#include <string>
#include <vector>

#include "agent/types.hpp"
#include "util/rng.hpp"

namespace agentloop::sim {

// Attribute vocabulary for the synthetic constraint tasks. A constraint is
// rendered as "name=value"; a query asks for K distinct attributes.
inline constexpr int kMaxAttributes = 8;

const std::vector<std::string>& attribute_names();
const std::vector<std::vector<std::string>>& attribute_values();

// Ground-truth task: K distinct attributes, one required value each.
struct ConstraintQuery {
    std::vector<std::string> attributes;
    std::vector<std::string> targets;

    ConstraintQuery(std::vector<std::string> attrs, std::vector<std::string> tgts);

    int k() const { return static_cast<int>(attributes.size()); }
    std::string constraint_token(int i) const { return attributes[static_cast<size_t>(i)] + "=" + targets[static_cast<size_t>(i)]; }
    std::vector<std::string> constraint_tokens() const;
};

std::string render_query_text(const ConstraintQuery& cq);

Query to_query(const ConstraintQuery& cq, const std::string& id);

ConstraintQuery sample_constraint_query(int k, Rng& rng);

// Ordered "name=value" tokens found in free text, emphasis marks stripped,
// duplicates removed (first occurrence wins).
std::vector<std::string> parse_attribute_tokens(const std::string& text);

}  // namespace agentloop::sim
