#pragma once

#include <string>

#include <nlohmann/json.hpp>

#include "msq/fpga_model.hpp"
#include "msq/kernel.hpp"
#include "msq/quantizers.hpp"
#include "msq/train.hpp"

// JSON forms of the artifacts exchanged between CLI stages. Code words are
// stored as packed integers (see msq::pack).
namespace msq {

using Json = nlohmann::ordered_json;

Json to_json(const QuantScheme& s);
QuantScheme scheme_from_json(const Json& j);

Json to_json(const MixedScheme& s);
MixedScheme mixed_scheme_from_json(const Json& j);

Json to_json(const LevelSet& ls);

/// {layer, theta, pr_sp2, assignments:["sp2"|"fixed", ...]}
Json to_json(const RowPartition& p, const std::string& layer);
RowPartition partition_from_json(const Json& j);

Json to_json(const QuantizedLayer& layer);
/// Validates shapes and that every code word belongs to its row's scheme.
QuantizedLayer quantized_layer_from_json(const Json& j);

Json to_json(const GemmTile& t);
Json to_json(const GemmStats& s);

/// Overwrites only the keys present in `j`; a wrongly typed value is a ConfigError.
void apply_json(TrainConfig& cfg, const Json& j);
Json to_json(const TrainConfig& cfg);

/// Parses text as JSON, mapping parse failures to InputError.
Json parse_json(const std::string& text, const std::string& what);

/// Shortest round-trip decimal form of a double.
std::string format_double(double v);

}  // namespace msq
