/**
 * @file gmm_io.hpp
 * @brief Mixture-model checkpointing (JSON document, lower-triangle
 *        covariance storage, exact double round-trip).
 */
#pragma once

#include <fstream>
#include <string>

#include <json.hpp>

#include "semidyn/gmm.hpp"

namespace semidyn {

namespace detail {

inline nlohmann::json lower_triangle(const Eigen::MatrixXd& m) {
  nlohmann::json arr = nlohmann::json::array();
  for (int r = 0; r < m.rows(); ++r) {
    for (int c = 0; c <= r; ++c) arr.push_back(m(r, c));
  }
  return arr;
}

inline Eigen::MatrixXd from_lower_triangle(const nlohmann::json& arr, int dim) {
  if (static_cast<int>(arr.size()) != dim * (dim + 1) / 2) {
    throw ContractViolation("mixture checkpoint: triangle length mismatch");
  }
  Eigen::MatrixXd m(dim, dim);
  int k = 0;
  for (int r = 0; r < dim; ++r) {
    for (int c = 0; c <= r; ++c) {
      m(r, c) = arr[k].get<double>();
      m(c, r) = m(r, c);
      ++k;
    }
  }
  return m;
}

}  // namespace detail

inline nlohmann::json mixture_to_json(const MixtureModel& model) {
  nlohmann::json doc;
  doc["schema"] = "semidyn-mixture-v1";
  doc["input_dim"] = model.input_dim();
  doc["output_dim"] = model.output_dim();
  doc["nu_create"] = model.nu_create();
  doc["sp_min"] = model.sp_min();
  doc["age_min"] = model.age_min();
  doc["sigma_init"] = detail::lower_triangle(model.sigma_init());
  nlohmann::json comps = nlohmann::json::array();
  for (const auto& c : model.components()) {
    nlohmann::json jc;
    jc["prior"] = c.prior;
    jc["sp"] = c.sp;
    jc["age"] = c.age;
    jc["mean"] = std::vector<double>(c.mean.data(), c.mean.data() + c.mean.size());
    jc["cov"] = detail::lower_triangle(c.cov);
    comps.push_back(std::move(jc));
  }
  doc["components"] = std::move(comps);
  return doc;
}

inline MixtureModel mixture_from_json(const nlohmann::json& doc) {
  if (doc.value("schema", "") != std::string("semidyn-mixture-v1")) {
    throw ContractViolation("mixture checkpoint: unknown schema");
  }
  const int in_dim = doc.at("input_dim").get<int>();
  const int out_dim = doc.at("output_dim").get<int>();
  const int dim = in_dim + out_dim;
  MixtureModel model(in_dim, out_dim,
                     detail::from_lower_triangle(doc.at("sigma_init"), dim),
                     doc.at("nu_create").get<double>(), doc.at("sp_min").get<double>(),
                     doc.at("age_min").get<long>());
  std::vector<GaussianComponent> comps;
  for (const auto& jc : doc.at("components")) {
    GaussianComponent c;
    c.prior = jc.at("prior").get<double>();
    c.sp = jc.at("sp").get<double>();
    c.age = jc.at("age").get<long>();
    const auto mean = jc.at("mean").get<std::vector<double>>();
    if (static_cast<int>(mean.size()) != dim) {
      throw ContractViolation("mixture checkpoint: mean length mismatch");
    }
    c.mean = Eigen::Map<const Eigen::VectorXd>(mean.data(), dim);
    c.cov = detail::from_lower_triangle(jc.at("cov"), dim);
    comps.push_back(std::move(c));
  }
  return model.with_components(std::move(comps));
}

inline void save_mixture(const MixtureModel& model, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ContractViolation("save_mixture: cannot open " + path);
  out << mixture_to_json(model).dump(1) << "\n";
}

inline MixtureModel load_mixture(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ContractViolation("load_mixture: cannot open " + path);
  nlohmann::json doc;
  in >> doc;
  return mixture_from_json(doc);
}

}  // namespace semidyn
