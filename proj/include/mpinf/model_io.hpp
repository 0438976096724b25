#pragma once

#include <fstream>
#include <string>

#include <json.hpp>

#include "mpinf/model.hpp"

namespace mpinf::io {

using nlohmann::json;

namespace detail {

inline double decode_value(const json& j, const std::string& where) {
  if (j.is_number()) {
    const double x = j.get<double>();
    if (!is_valid_value(x)) throw validation_error(where + ": value must be finite or \"-inf\"");
    return x;
  }
  if (j.is_string() && j.get<std::string>() == "-inf") return neg_inf;
  throw validation_error(where + ": expected a number or the string \"-inf\"");
}

inline json encode_value(double x) {
  if (x == neg_inf) return json("-inf");
  return json(x);
}

inline std::vector<double> decode_table(const json& j, const std::string& where) {
  if (!j.is_array()) throw validation_error(where + ": expected an array");
  std::vector<double> out;
  out.reserve(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(decode_value(j[i], where + "[" + std::to_string(i) + "]"));
  return out;
}

}  // namespace detail

// Parses and fully validates the model document
//   {"domains":[...], "unary":[[...],...], "factors":[{"vars":[...],"table":[...]},...]}
// with -inf spelled as the string "-inf" and factor tables in mixed-radix
// row-major order (last listed variable fastest). Rejects singleton or
// duplicate factors, shape mismatches, all-(-inf) tables and compatibility
// violations, naming the offending element.
inline model model_from_json(const json& doc) {
  if (!doc.is_object()) throw validation_error("model document: expected a JSON object");
  for (const char* key : {"domains", "unary", "factors"})
    if (!doc.contains(key)) throw validation_error(std::string("model document: missing key \"") + key + "\"");

  hypergraph g;
  const json& domains = doc["domains"];
  if (!domains.is_array() || domains.empty()) throw validation_error("domains: expected a non-empty array");
  for (std::size_t v = 0; v < domains.size(); ++v) {
    if (!domains[v].is_number_integer() || domains[v].get<long>() < 1)
      throw validation_error("domains[" + std::to_string(v) + "]: expected an integer >= 1");
    g.domain_sizes.push_back(domains[v].get<int>());
  }

  potentials p;
  const json& unary = doc["unary"];
  if (!unary.is_array() || unary.size() != domains.size())
    throw validation_error("unary: expected one table per variable");
  for (std::size_t v = 0; v < unary.size(); ++v)
    p.unary.push_back(detail::decode_table(unary[v], "unary[" + std::to_string(v) + "]"));

  const json& factors = doc["factors"];
  if (!factors.is_array()) throw validation_error("factors: expected an array");
  for (std::size_t e = 0; e < factors.size(); ++e) {
    const std::string where = "factors[" + std::to_string(e) + "]";
    const json& f = factors[e];
    if (!f.is_object() || !f.contains("vars") || !f.contains("table"))
      throw validation_error(where + ": expected an object with \"vars\" and \"table\"");
    if (!f["vars"].is_array()) throw validation_error(where + ".vars: expected an array");
    std::vector<int> vars;
    for (std::size_t k = 0; k < f["vars"].size(); ++k) {
      if (!f["vars"][k].is_number_integer())
        throw validation_error(where + ".vars[" + std::to_string(k) + "]: expected an integer");
      vars.push_back(f["vars"][k].get<int>());
    }
    g.edges.push_back(std::move(vars));
    p.factor.push_back(detail::decode_table(f["table"], where + ".table"));
  }

  model m(std::move(g), std::move(p));  // structural validation with element-precise messages
  if (!check_compatibility(m))
    throw validation_error("model document: potentials violate the compatibility condition "
                           "(a unary component is live iff its factor slices have a live entry)");
  return m;
}

inline json model_to_json(const model& m) {
  json doc;
  doc["domains"] = m.graph().domain_sizes;
  doc["unary"] = json::array();
  for (const auto& tab : m.theta().unary) {
    json t = json::array();
    for (double x : tab) t.push_back(detail::encode_value(x));
    doc["unary"].push_back(std::move(t));
  }
  doc["factors"] = json::array();
  for (int e = 0; e < m.num_edges(); ++e) {
    json f;
    f["vars"] = m.edge_vars(e);
    json t = json::array();
    for (double x : m.theta().factor[e]) t.push_back(detail::encode_value(x));
    f["table"] = std::move(t);
    doc["factors"].push_back(std::move(f));
  }
  return doc;
}

inline model load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw validation_error("cannot open model file: " + path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& err) {
    throw validation_error(path + ": " + err.what());
  }
  return model_from_json(doc);
}

inline void save_model(const model& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw validation_error("cannot open output file: " + path);
  out << model_to_json(m).dump(2) << "\n";
}

}  // namespace mpinf::io
