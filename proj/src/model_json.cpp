#include "vcm/model_json.hpp"

namespace vcm {

using nlohmann::json;

namespace {

json to_array(const Vector& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

Vector to_vector(const json& arr) {
  Vector v(static_cast<Eigen::Index>(arr.size()));
  for (std::size_t i = 0; i < arr.size(); ++i) v[static_cast<Eigen::Index>(i)] = arr[i].get<double>();
  return v;
}

}  // namespace

json fit_to_json(const VCFit& fit) {
  json doc;
  doc["degree"] = fit.degree;
  doc["knots"] = fit.knots.per_predictor;
  doc["boundary"] = {fit.u_min, fit.u_max};
  json coefs = json::array();
  for (const auto& c : fit.coefficients) coefs.push_back(to_array(c));
  doc["coefficients"] = std::move(coefs);
  doc["rss"] = fit.rss;
  doc["bic"] = fit.bic;
  doc["n"] = fit.n;
  doc["p"] = fit.p;
  return doc;
}

VCFit fit_from_json(const json& doc) {
  try {
    VCFit fit;
    fit.degree = doc.at("degree").get<int>();
    fit.knots.per_predictor = doc.at("knots").get<std::vector<std::vector<double>>>();
    const auto& boundary = doc.at("boundary");
    if (boundary.size() != 2) throw InvalidInput("model JSON: boundary must have two entries");
    fit.u_min = boundary[0].get<double>();
    fit.u_max = boundary[1].get<double>();
    for (const auto& c : doc.at("coefficients")) fit.coefficients.push_back(to_vector(c));
    fit.rss = doc.at("rss").get<double>();
    fit.bic = doc.at("bic").get<double>();
    fit.n = doc.at("n").get<std::size_t>();
    fit.p = doc.at("p").get<std::size_t>();

    if (fit.knots.p() != fit.p || fit.coefficients.size() != fit.p)
      throw InvalidInput("model JSON: knots and coefficients must have p entries");
    for (std::size_t j = 0; j < fit.p; ++j) {
      const BSplineBasis basis(fit.degree, fit.knots.per_predictor[j], fit.u_min, fit.u_max);
      if (fit.coefficients[j].size() != basis.n_basis())
        throw InvalidInput("model JSON: coefficient count does not match the basis of predictor " +
                           std::to_string(j + 1));
    }
    return fit;
  } catch (const json::exception& e) {
    throw InvalidInput(std::string("model JSON: ") + e.what());
  }
}

std::string dump_json(const json& doc) { return doc.dump(2) + "\n"; }

}  // namespace vcm
