#pragma once

#include "vcm/vcmodel.hpp"

#include <json.hpp>

#include <string>

namespace vcm {

/// {degree, knots: [[...] per predictor], boundary: [u_min, u_max],
///  coefficients: [[...] per predictor], rss, bic, n, p}
nlohmann::json fit_to_json(const VCFit& fit);

/// Inverse of fit_to_json; throws InvalidInput on schema violations.
VCFit fit_from_json(const nlohmann::json& doc);

/// Compact dump with shortest round-trip number formatting and a trailing newline.
std::string dump_json(const nlohmann::json& doc);

}  // namespace vcm
