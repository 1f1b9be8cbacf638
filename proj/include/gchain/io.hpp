#pragma once

#include <string>
#include <vector>

#include "gchain/bounds.hpp"
#include "gchain/chain_rule.hpp"
#include "gchain/function_class.hpp"
#include "gchain/point_set.hpp"

namespace gchain {

// Whole-file helpers; read throws parse_error when the file cannot be opened,
// write throws invariant_error when the target cannot be created.
std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

// Hash of raw bytes in the same shape git gives a blob: sha1 over
// "blob <size>\0<bytes>", lowercase hex.  Lets outputs cite their exact
// inputs without copying them.
std::string content_hash(const std::string& bytes);

// Point sets: JSON object { "dim", "points", optional "labels" }, or CSV with
// one point per row.  Parsers validate the result before returning it.
std::string point_set_to_json(const PointSet& y);
PointSet point_set_from_json(const std::string& text);
std::string point_set_to_csv(const PointSet& y);
PointSet point_set_from_csv(const std::string& text);

// Function classes.  Tabulated classes store their value table under
// "functions", member major, one row of out_dim numbers per point.  Kernel
// balls keep only the three scalars; a replacement kernel callback is not a
// file concept, so round trips restore the default kernel.
std::string tabulated_to_json(const TabulatedClass& f);
TabulatedClass tabulated_from_json(const std::string& text);
std::string kernel_ball_to_json(const KernelBallClass& f);
KernelBallClass kernel_ball_from_json(const std::string& text);

// Measurement suites: one single-line JSON record per instance, newline
// separated, every estimate keeping its seed and stream identity so any line
// can be recomputed in isolation.
std::string chain_terms_to_json(const ChainTerms& t);
ChainTerms chain_terms_from_json(const std::string& text);
std::string suite_to_json_lines(const std::vector<ChainTerms>& suite);
std::vector<ChainTerms> suite_from_json_lines(const std::string& text);

// Fit summary for a measured suite.
std::string fit_to_json(const FittedConstants& fit);
FittedConstants fit_from_json(const std::string& text);

// Bound calculator inputs mirror the struct fields one to one.
std::string risk_input_to_json(const RiskBoundInput& input);
RiskBoundInput risk_input_from_json(const std::string& text);
std::string two_layer_spec_to_json(const TwoLayerSpec& spec);
TwoLayerSpec two_layer_spec_from_json(const std::string& text);

// Layer stack for the iterated bound, with the two fitted constants.
struct DeepSpec {
  double c1 = 1.0;
  double c2 = 1.0;
  std::vector<LayerSummary> layers;
};
std::string deep_spec_to_json(const DeepSpec& spec);
DeepSpec deep_spec_from_json(const std::string& text);

// Reports: JSON is canonical ({ "terms": [ { "name", "value", "formula" } ],
// "total", "notes" }); CSV keeps the name and value columns only.
std::string bound_report_to_json(const BoundReport& report);
BoundReport bound_report_from_json(const std::string& text);
std::string bound_report_to_csv(const BoundReport& report);

}  // namespace gchain
