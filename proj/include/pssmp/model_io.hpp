#pragma once

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "pssmp/errors.hpp"
#include "pssmp/levy_model.hpp"

namespace pssmp {

namespace detail {

inline const nlohmann::json& require_field(const nlohmann::json& obj, const std::string& key, const std::string& path) {
    auto it = obj.find(key);
    if (it == obj.end()) throw ParseError(path + "." + key, "missing required field");
    return *it;
}

inline double as_number(const nlohmann::json& v, const std::string& path) {
    if (!v.is_number()) throw ParseError(path, "expected a number");
    return v.get<double>();
}

inline void reject_unknown(const nlohmann::json& obj, std::initializer_list<const char*> allowed,
                           const std::string& path) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool known = false;
        for (const char* a : allowed) known = known || it.key() == a;
        if (!known) throw ParseError(path + "." + it.key(), "unknown field");
    }
}

inline std::vector<double> number_array(const nlohmann::json& v, const std::string& path) {
    if (!v.is_array()) throw ParseError(path, "expected an array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < v.size(); ++i) out.push_back(as_number(v[i], path + "[" + std::to_string(i) + "]"));
    return out;
}

inline JumpMeasure parse_density(const nlohmann::json& d, const std::string& path) {
    if (!d.is_object()) throw ParseError(path, "expected an object");
    reject_unknown(d, {"family", "params"}, path);
    const auto& fam = require_field(d, "family", path);
    if (!fam.is_string()) throw ParseError(path + ".family", "expected a string");
    const std::string family = fam.get<std::string>();
    const std::string ppath = path + ".params";
    const auto& params = require_field(d, "params", path);
    if (!params.is_object()) throw ParseError(ppath, "expected an object");
    try {
        if (family == "exp_tilted_stable") {
            reject_unknown(params, {"c", "alpha", "beta"}, ppath);
            const double c = as_number(require_field(params, "c", ppath), ppath + ".c");
            const double alpha = as_number(require_field(params, "alpha", ppath), ppath + ".alpha");
            const double beta = params.contains("beta") ? as_number(params["beta"], ppath + ".beta") : 0.0;
            return JumpMeasure::density(exp_tilted_stable(c, alpha, beta));
        }
        if (family == "custom_table") {
            reject_unknown(params, {"u", "density"}, ppath);
            auto u = number_array(require_field(params, "u", ppath), ppath + ".u");
            auto f = number_array(require_field(params, "density", ppath), ppath + ".density");
            return JumpMeasure::density(tabulated_density(std::move(u), std::move(f)));
        }
    } catch (const InvalidTriplet& e) {
        throw ParseError(ppath, e.what());
    }
    throw ParseError(path + ".family", "unknown family '" + family + "' (expected exp_tilted_stable or custom_table)");
}

inline JumpMeasure parse_jumps(const nlohmann::json& j, const std::string& path) {
    if (!j.is_object()) throw ParseError(path, "expected an object with 'atoms' or 'density'");
    reject_unknown(j, {"atoms", "density"}, path);
    const bool has_atoms = j.contains("atoms");
    const bool has_density = j.contains("density");
    if (has_atoms == has_density) throw ParseError(path, "exactly one of 'atoms' or 'density' is required");
    if (has_density) return parse_density(j["density"], path + ".density");
    const auto& atoms = j["atoms"];
    const std::string apath = path + ".atoms";
    if (!atoms.is_array()) throw ParseError(apath, "expected an array of [u, mass] pairs");
    std::vector<Atom> list;
    for (std::size_t i = 0; i < atoms.size(); ++i) {
        const std::string ipath = apath + "[" + std::to_string(i) + "]";
        const auto& pair = atoms[i];
        if (!pair.is_array() || pair.size() != 2) throw ParseError(ipath, "expected [u, mass]");
        list.push_back(Atom{as_number(pair[0], ipath + "[0]"), as_number(pair[1], ipath + "[1]")});
    }
    return JumpMeasure::atoms(std::move(list));
}

}  // namespace detail

/// Parses a triplet description. Missing "q" means 0, missing "jumps" means no jumps.
/// Structural parse errors carry the JSON path of the offending field; invariant
/// violations (positive atoms, negative sigma2, ...) are left to validate_triplet.
inline LevyTriplet parse_triplet(const nlohmann::json& doc) {
    const std::string root = "$";
    if (!doc.is_object()) throw ParseError(root, "expected a JSON object");
    detail::reject_unknown(doc, {"gamma", "sigma2", "q", "jumps"}, root);
    LevyTriplet t;
    t.gamma = detail::as_number(detail::require_field(doc, "gamma", root), "$.gamma");
    t.sigma2 = detail::as_number(detail::require_field(doc, "sigma2", root), "$.sigma2");
    if (doc.contains("q")) t.kill_rate = detail::as_number(doc["q"], "$.q");
    if (doc.contains("jumps")) t.jumps = detail::parse_jumps(doc["jumps"], "$.jumps");
    return t;
}

inline LevyTriplet parse_triplet_text(const std::string& text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError("$", std::string("malformed JSON: ") + e.what());
    }
    return parse_triplet(doc);
}

inline LevyTriplet load_triplet(const std::string& file) {
    std::ifstream in(file);
    if (!in) throw ParseError("$", "cannot open model file '" + file + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_triplet_text(ss.str());
}

/// Stable text form of a triplet for provenance digests.
inline std::string canonical_text(const LevyTriplet& t) {
    std::string s = "gamma=" + format_double(t.gamma) + ";sigma2=" + format_double(t.sigma2) +
                    ";q=" + format_double(t.kill_rate) + ";jumps=";
    if (t.jumps.is_atomic()) {
        s += "atoms[";
        for (const Atom& a : t.jumps.atom_list()) s += "(" + format_double(a.location) + "," + format_double(a.mass) + ")";
        s += "]";
    } else {
        s += t.jumps.density_fn().description();
    }
    return s;
}

/// 64-bit FNV-1a, rendered as 16 hex digits.
inline std::string digest(const std::string& text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace pssmp
