#include "sim/attributes.hpp"

#include <set>

#include "util/errors.hpp"
#include "util/text.hpp"

namespace agentloop::sim {

const std::vector<std::string>& attribute_names() {
    static const std::vector<std::string> names = {
        "color", "count", "position", "size", "texture", "material", "lighting", "style"};
    return names;
}

const std::vector<std::vector<std::string>>& attribute_values() {
    static const std::vector<std::vector<std::string>> values = {
        {"red", "blue", "green", "yellow"},
        {"one", "two", "three", "five"},
        {"left", "right", "above", "below"},
        {"small", "large", "tiny", "huge"},
        {"smooth", "rough", "glossy", "matte"},
        {"wood", "metal", "glass", "stone"},
        {"daylight", "neon", "candlelit", "overcast"},
        {"photo", "sketch", "painting", "render"}};
    return values;
}

ConstraintQuery::ConstraintQuery(std::vector<std::string> attrs, std::vector<std::string> tgts)
    : attributes(std::move(attrs)), targets(std::move(tgts)) {
    if (attributes.size() != targets.size()) {
        throw Error("attribute/target length mismatch");
    }
    if (attributes.size() < 2 || attributes.size() > kMaxAttributes) {
        throw Error("constraint query needs between 2 and 8 attributes");
    }
    std::set<std::string> seen(attributes.begin(), attributes.end());
    if (seen.size() != attributes.size()) {
        throw Error("constraint query attributes must be distinct");
    }
}

std::vector<std::string> ConstraintQuery::constraint_tokens() const {
    std::vector<std::string> out;
    out.reserve(attributes.size());
    for (int i = 0; i < k(); ++i) out.push_back(constraint_token(i));
    return out;
}

std::string render_query_text(const ConstraintQuery& cq) {
    std::string text = "a scene with";
    for (int i = 0; i < cq.k(); ++i) {
        text += i == 0 ? " " : " and ";
        text += cq.constraint_token(i);
    }
    return text;
}

Query to_query(const ConstraintQuery& cq, const std::string& id) {
    Query q;
    q.id = id;
    q.text = render_query_text(cq);
    q.constraints = cq.constraint_tokens();
    q.validate();
    return q;
}

ConstraintQuery sample_constraint_query(int k, Rng& rng) {
    const auto& names = attribute_names();
    const auto& values = attribute_values();
    if (k < 2 || k > kMaxAttributes) throw Error("k out of range for query sampling");
    auto perm = rng.permutation(names.size());
    std::vector<std::string> attrs;
    std::vector<std::string> tgts;
    // Keep vocabulary order for readability; the subset itself is random.
    std::vector<size_t> chosen(perm.begin(), perm.begin() + k);
    std::sort(chosen.begin(), chosen.end());
    for (size_t idx : chosen) {
        attrs.push_back(names[idx]);
        const auto& vals = values[idx];
        tgts.push_back(vals[static_cast<size_t>(rng.below(vals.size()))]);
    }
    return ConstraintQuery(std::move(attrs), std::move(tgts));
}

std::vector<std::string> parse_attribute_tokens(const std::string& text) {
    std::vector<std::string> out;
    std::set<std::string> seen;
    for (const auto& word : split_words(text)) {
        std::string_view w = word;
        while (!w.empty() && w.front() == '!') w.remove_prefix(1);
        const size_t eq = w.find('=');
        if (eq == std::string_view::npos || eq == 0 || eq + 1 >= w.size()) continue;
        std::string token(w);
        if (seen.insert(token).second) out.push_back(std::move(token));
    }
    return out;
}

}  // namespace agentloop::sim
