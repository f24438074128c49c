#pragma once
// CSV ingestion (header y, x1..xp, z1..zq), JSON emission with fixed 17
// significant-digit number formatting, and fit (de)serialization.
#include "simspline/model_core.hpp"
#include <json.hpp>
#include <iosfwd>
#include <string>

namespace simspline {

Dataset read_dataset_csv(const std::string& path);

// format a double with 17 significant digits (round-trip exact)
std::string format_double(double v);

// serialize a JSON document with all floating-point numbers at 17
// significant digits (nlohmann's default dump uses shortest-round-trip)
void write_json(std::ostream& os, const nlohmann::json& j, int indent = 2);
void write_json_file(const std::string& path, const nlohmann::json& j);

nlohmann::json fit_to_json(const SingleIndexFit& fit);
SingleIndexFit fit_from_json(const nlohmann::json& j);

void write_band_csv(const std::string& path, const Eigen::VectorXd& grid,
                    const Eigen::VectorXd& center, const Eigen::VectorXd& lower,
                    const Eigen::VectorXd& upper);

} // namespace simspline
