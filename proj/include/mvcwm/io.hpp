#pragma once

#include "mvcwm/evaluate.hpp"
#include "mvcwm/model.hpp"
#include "mvcwm/simulate.hpp"

#include <json.hpp>

#include <iosfwd>
#include <string>
#include <vector>

namespace mvcwm {

/// Long format, header `obs,block,row,col,value`, block in {Y, X}, indices
/// 1-based. Every cell of every observation must appear exactly once;
/// otherwise ValidationError naming the cell.
[[nodiscard]] ThreeWayData read_long_csv(std::istream& in);
[[nodiscard]] ThreeWayData read_long_csv(const std::string& path);
void write_long_csv(const ThreeWayData& data, std::ostream& out);
void write_long_csv(const ThreeWayData& data, const std::string& path);

[[nodiscard]] nlohmann::json to_json(const Eigen::MatrixXd& m);
[[nodiscard]] Eigen::MatrixXd matrix_from_json(const nlohmann::json& j);
[[nodiscard]] nlohmann::json to_json(const TailParams& tail);
[[nodiscard]] TailParams tail_from_json(const nlohmann::json& j);
[[nodiscard]] nlohmann::json to_json(const ModelSpec& spec);
[[nodiscard]] ModelSpec spec_from_json(const nlohmann::json& j);
[[nodiscard]] nlohmann::json to_json(const ModelParams& params);
[[nodiscard]] ModelParams params_from_json(const nlohmann::json& j);
[[nodiscard]] nlohmann::json to_json(const FitResult& result);

/// Ranked CSV (best BIC first, failed fits last).
void write_summary_csv(const SelectionReport& report, std::ostream& out);
[[nodiscard]] SelectionReport read_summary_csv(std::istream& in);
[[nodiscard]] nlohmann::json to_json(const SelectionReport& report);

[[nodiscard]] nlohmann::json to_json(const RecoveryReport& report);
[[nodiscard]] nlohmann::json to_json(const ClassificationReport& report);
void write_recovery_csv(const RecoveryReport& report, std::ostream& out);
void write_classification_csv(const ClassificationReport& report, std::ostream& out);

/// Shortest decimal text that reads back to the same double.
[[nodiscard]] std::string format_double(double v);

}  // namespace mvcwm
