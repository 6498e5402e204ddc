#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "indcal/calibration.hpp"
#include "indcal/data.hpp"
#include "indcal/decision.hpp"
#include "indcal/forecaster.hpp"
#include "indcal/training.hpp"

namespace indcal {

using Json = nlohmann::json;

inline constexpr const char* kCheckpointFormat = "indcal-checkpoint";
inline constexpr int kCheckpointVersion = 1;

// Reads and parses a JSON file. Throws ConfigError when the file cannot be
// opened and ParseError (with line/column) when it is malformed.
Json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const Json& value);
void write_text_file(const std::filesystem::path& path, const std::string& text);

// Strict readers: unknown keys and wrongly typed values raise ConfigError
// naming the key. Missing keys keep their defaults.
TrainConfig train_config_from_json(const Json& j);
Json to_json(const TrainConfig& c);
GeneratorSpec generator_spec_from_json(const Json& j);
Json to_json(const GeneratorSpec& s);
PsiConfig psi_config_from_json(const Json& j);
Json to_json(const PsiConfig& c);
EvalOptions eval_options_from_json(const Json& j);
Json to_json(const EvalOptions& o);
BankGameConfig bank_game_config_from_json(const Json& j);
Json to_json(const BankGameConfig& c);

// Checkpoint document: format tag, version, kind, and per kind the network
// layout, flat weights, sigma floor, standardization, training config, or the
// pass-through scale, or the inner checkpoint plus recalibration knots.
// Oracle forecasters hold arbitrary functions and cannot be saved.
Json checkpoint_to_json(const Forecaster& f, const std::optional<TrainConfig>& config = {});
Forecaster checkpoint_from_json(const Json& j);
std::optional<TrainConfig> checkpoint_train_config(const Json& j);
void save_checkpoint(const std::filesystem::path& path, const Forecaster& f,
                     const std::optional<TrainConfig>& config = {});
Forecaster load_checkpoint(const std::filesystem::path& path);

Json to_json(const MpaicCertificate& c);
Json to_json(const PaicConversion& c);
Json to_json(const GroupSpec& g);
Json to_json(const CalibrationReport& r);
Json to_json(const PhaseSummary& s);
Json to_json(const MarkovRow& row);

// History CSV: epoch,train_paic,train_nll,train_combined,val_paic,val_nll,val_combined
std::string history_csv(const std::vector<EpochRecord>& history);
// delta,epsilon_hat,witness,witness_size
std::string curve_csv(const std::vector<CurvePoint>& curve);
// group,size,error
std::string groups_csv(const std::vector<GroupError>& groups);
// phase,round,y,psi,applied,approved,bank_utility,customer_utility,exploit
std::string game_trace_csv(const std::vector<GameRound>& trace);
// k,empirical,bound_avg,bound_paic
std::string markov_csv(const std::vector<MarkovRow>& rows);

// Shortest round-trip decimal form.
std::string format_double(double v);

}  // namespace indcal
