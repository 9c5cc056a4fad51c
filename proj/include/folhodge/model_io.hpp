#pragma once

/**
 * @file model_io.hpp
 * @brief Canonical JSON serialization of coframe models.
 *
 * The writer is canonical: field order, key order, and number formatting are
 * fixed, so write -> read -> write is byte-identical. Numbers use the
 * shortest representation that round-trips the exact double, which makes the
 * files diffable across machines. Schema errors carry the path of the
 * offending field.
 */

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "folhodge/model.hpp"

namespace folhodge {

/// Unreadable or malformed model file: wrong types, missing or unknown
/// fields, bad mode keys. Distinct from validation failures, which concern a
/// well-formed model's content.
class ModelSchemaError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

namespace detail {

inline long json_int(const nlohmann::ordered_json& j, const std::string& path) {
    if (!j.is_number_integer())
        throw ModelSchemaError("model file: \"" + path + "\" must be an integer");
    return j.get<long>();
}

inline double json_num(const nlohmann::ordered_json& j, const std::string& path) {
    if (!j.is_number()) throw ModelSchemaError("model file: \"" + path + "\" must be a number");
    return j.get<double>();
}

inline const nlohmann::ordered_json& json_field(const nlohmann::ordered_json& obj,
                                                const std::string& key, const std::string& path) {
    if (!obj.is_object()) throw ModelSchemaError("model file: \"" + path + "\" must be an object");
    auto it = obj.find(key);
    if (it == obj.end())
        throw ModelSchemaError("model file: missing field \"" +
                               (path.empty() ? key : path + "." + key) + "\"");
    return *it;
}

/// Strict integer parse of a whole token, for kappa keys.
inline int parse_int_token(const std::string& tok, const std::string& path) {
    std::size_t pos = 0;
    int value = 0;
    try {
        value = std::stoi(tok, &pos);
    } catch (const std::exception&) {
        pos = 0;
    }
    if (pos != tok.size() || tok.empty())
        throw ModelSchemaError("model file: \"" + path + "\" key \"" + tok +
                               "\" is not an integer");
    return value;
}

inline std::vector<int> parse_mode_key(const std::string& key, std::size_t arity,
                                       const std::string& path) {
    std::vector<int> modes;
    std::string tok;
    std::istringstream is(key);
    while (std::getline(is, tok, ',')) modes.push_back(parse_int_token(tok, path));
    if (modes.size() != arity)
        throw ModelSchemaError("model file: \"" + path + "\" key \"" + key + "\" has " +
                               std::to_string(modes.size()) + " mode indices, expected " +
                               std::to_string(arity) + " (one per active coordinate)");
    return modes;
}

inline std::string mode_key_string(const std::vector<int>& modes) {
    std::string s;
    for (std::size_t i = 0; i < modes.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(modes[i]);
    }
    return s;
}

}  // namespace detail

inline nlohmann::ordered_json model_to_json(const CoframeModel& m) {
    nlohmann::ordered_json j;
    j["q"] = m.q;
    j["structure"] = nlohmann::ordered_json::array();
    for (const auto& s : m.structure)
        j["structure"].push_back({{"k", s.k}, {"i", s.i}, {"j", s.j}, {"value", s.value}});
    j["active"] = nlohmann::ordered_json::array();
    for (const auto& a : m.active)
        j["active"].push_back(
            {{"coframe", a.coframe_index}, {"period", a.period}, {"grid", a.grid}});
    j["metric"] = nlohmann::ordered_json::array();
    for (int r = 0; r < m.metric.rows(); ++r)
        for (int c = 0; c < m.metric.cols(); ++c) j["metric"].push_back(m.metric(r, c));
    j["kappa"] = nlohmann::ordered_json::object();
    for (const auto& [ci, poly] : m.kappa) {
        nlohmann::ordered_json comp = nlohmann::ordered_json::object();
        for (const auto& [modes, value] : poly.terms)
            comp[detail::mode_key_string(modes)] = value;
        j["kappa"][std::to_string(ci)] = std::move(comp);
    }
    j["orientation"] = m.orientation;
    return j;
}

/// Canonical text form: two-space indent plus a trailing newline.
inline std::string model_to_string(const CoframeModel& m) { return model_to_json(m).dump(2) + "\n"; }

inline CoframeModel model_from_json(const nlohmann::ordered_json& j) {
    using detail::json_field;
    using detail::json_int;
    using detail::json_num;
    if (!j.is_object()) throw ModelSchemaError("model file: top level must be an object");

    static const std::vector<std::string> known = {"q",      "structure",   "active",
                                                   "metric", "kappa",       "orientation"};
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (std::find(known.begin(), known.end(), it.key()) == known.end())
            throw ModelSchemaError("model file: unknown field \"" + it.key() + "\"");
    }

    CoframeModel m;
    m.q = static_cast<int>(json_int(json_field(j, "q", ""), "q"));
    if (m.q < 1) throw ModelSchemaError("model file: \"q\" must be at least 1");

    const auto& st = json_field(j, "structure", "");
    if (!st.is_array()) throw ModelSchemaError("model file: \"structure\" must be an array");
    for (std::size_t i = 0; i < st.size(); ++i) {
        const std::string path = "structure[" + std::to_string(i) + "]";
        StructureTerm t;
        t.k = static_cast<int>(json_int(json_field(st[i], "k", path), path + ".k"));
        t.i = static_cast<int>(json_int(json_field(st[i], "i", path), path + ".i"));
        t.j = static_cast<int>(json_int(json_field(st[i], "j", path), path + ".j"));
        t.value = json_num(json_field(st[i], "value", path), path + ".value");
        m.structure.push_back(t);
    }

    const auto& ac = json_field(j, "active", "");
    if (!ac.is_array()) throw ModelSchemaError("model file: \"active\" must be an array");
    for (std::size_t i = 0; i < ac.size(); ++i) {
        const std::string path = "active[" + std::to_string(i) + "]";
        ActiveAxis a;
        a.coframe_index =
            static_cast<int>(json_int(json_field(ac[i], "coframe", path), path + ".coframe"));
        a.period = json_num(json_field(ac[i], "period", path), path + ".period");
        a.grid = static_cast<int>(json_int(json_field(ac[i], "grid", path), path + ".grid"));
        m.active.push_back(a);
    }

    const auto& me = json_field(j, "metric", "");
    if (!me.is_array() || me.size() != static_cast<std::size_t>(m.q) * m.q)
        throw ModelSchemaError("model file: \"metric\" must be an array of q*q numbers (row-major)");
    m.metric.resize(m.q, m.q);
    for (int r = 0; r < m.q; ++r)
        for (int c = 0; c < m.q; ++c)
            m.metric(r, c) = json_num(me[static_cast<std::size_t>(r) * m.q + c],
                                      "metric[" + std::to_string(r * m.q + c) + "]");

    const auto& ka = json_field(j, "kappa", "");
    if (!ka.is_object()) throw ModelSchemaError("model file: \"kappa\" must be an object");
    for (auto it = ka.begin(); it != ka.end(); ++it) {
        const int ci = detail::parse_int_token(it.key(), "kappa");
        if (ci < 1 || ci > m.q)
            throw ModelSchemaError("model file: \"kappa\" component index " + it.key() +
                                   " outside 1..q");
        const std::string path = "kappa[\"" + it.key() + "\"]";
        if (!it.value().is_object())
            throw ModelSchemaError("model file: \"" + path + "\" must be an object");
        TrigPoly poly;
        for (auto mt = it.value().begin(); mt != it.value().end(); ++mt) {
            const std::vector<int> modes =
                detail::parse_mode_key(mt.key(), m.active.size(), path);
            poly.terms[modes] = json_num(mt.value(), path + "[\"" + mt.key() + "\"]");
        }
        if (!poly.terms.empty()) m.kappa[ci] = std::move(poly);
    }

    const long ori = json_int(json_field(j, "orientation", ""), "orientation");
    if (ori != 1 && ori != -1)
        throw ModelSchemaError("model file: \"orientation\" must be 1 or -1");
    m.orientation = static_cast<int>(ori);
    return m;
}

inline CoframeModel model_from_string(const std::string& text) {
    nlohmann::ordered_json j;
    try {
        j = nlohmann::ordered_json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ModelSchemaError(std::string("model file: JSON parse error: ") + e.what());
    }
    return model_from_json(j);
}

inline void save_model(const std::string& path, const CoframeModel& m) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open \"" + path + "\" for writing");
    out << model_to_string(m);
    if (!out) throw std::runtime_error("write to \"" + path + "\" failed");
}

/// Parse and schema-check a model file. Validation gates are the caller's
/// responsibility (constructing an Engine runs them).
inline CoframeModel load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ModelSchemaError("cannot read model file \"" + path + "\"");
    std::ostringstream buf;
    buf << in.rdbuf();
    return model_from_string(buf.str());
}

}  // namespace folhodge
