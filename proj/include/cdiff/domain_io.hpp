// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include "json.hpp"

#include "cdiff/error.hpp"
#include "cdiff/geometry.hpp"

namespace cdiff {

using Json = nlohmann::json;

inline Json vec_to_json(const Vec& v) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

inline Vec vec_from_json(const Json& j) {
  if (!j.is_array()) throw Error(ErrorKind::config_error, "expected a numeric array");
  Vec v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  return v;
}

inline Json domain_to_json(const DomainSpec& domain) {
  const auto& set = domain.constrained();
  Json lin = Json::array();
  for (const auto& c : set.linear()) lin.push_back({{"normal", vec_to_json(c.normal())}, {"offset", c.offset()}});
  Json sph = Json::array();
  for (const auto& c : set.spheres()) sph.push_back({{"center", vec_to_json(c.center())}, {"radius", c.radius()}});
  return {{"dimension", set.dimension()}, {"linear", lin}, {"spheres", sph}, {"periodic_dims", domain.periodic_dims()}};
}

namespace detail {

inline ConstraintSet constraint_set_from_preset(const Json& j) {
  const std::string preset = j.at("preset").get<std::string>();
  if (preset == "hypercube") return make_hypercube(j.at("dim").get<std::size_t>());
  if (preset == "simplex") return make_simplex(j.at("dim").get<std::size_t>());
  if (preset == "birkhoff") return make_birkhoff(j.at("n").get<std::size_t>());
  if (preset == "cholesky_ball") return make_cholesky_ball(j.at("dim").get<std::size_t>(), j.at("C").get<double>());
  if (preset == "loop") {
    return make_loop_polytope(j.at("lengths").get<std::vector<double>>(), j.at("d_anchor").get<double>());
  }
  if (preset == "interval") return make_interval(j.value("lower", 0.0), j.value("upper", 1.0));
  if (preset == "box") return make_box(vec_from_json(j.at("lower")), vec_from_json(j.at("upper")));
  if (preset == "none") return ConstraintSet();
  throw Error(ErrorKind::config_error, "unknown domain preset '" + preset + "'");
}

}  // namespace detail

/// Accepts either the explicit constraint document or {"preset": ...}.
inline DomainSpec domain_from_json(const Json& j) {
  try {
    std::size_t periodic = j.value("periodic_dims", std::size_t{0});
    if (j.contains("preset")) {
      if (j.at("preset") == "torus") return DomainSpec(ConstraintSet(), j.at("dim").get<std::size_t>());
      return DomainSpec(detail::constraint_set_from_preset(j), periodic);
    }
    const auto dim = j.at("dimension").get<std::size_t>();
    std::vector<LinearConstraint> lin;
    for (const auto& c : j.value("linear", Json::array())) {
      lin.emplace_back(vec_from_json(c.at("normal")), c.at("offset").get<double>());
    }
    std::vector<SphereConstraint> sph;
    for (const auto& c : j.value("spheres", Json::array())) {
      sph.emplace_back(vec_from_json(c.at("center")), c.at("radius").get<double>());
    }
    if (dim == 0 && lin.empty() && sph.empty()) return DomainSpec(ConstraintSet(), periodic);
    return DomainSpec(ConstraintSet(dim, std::move(lin), std::move(sph)), periodic);
  } catch (const Json::exception& e) {
    throw Error(ErrorKind::config_error, std::string("malformed domain document: ") + e.what());
  }
}

/// FNV-1a over the canonical (key-sorted, compact) JSON text.
inline std::uint64_t json_hash(const Json& j) {
  const std::string text = j.dump();
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string hash_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline std::string domain_hash(const DomainSpec& domain) { return hash_hex(json_hash(domain_to_json(domain))); }

}  // namespace cdiff
