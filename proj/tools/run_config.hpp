#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "wran/datagen.hpp"
#include "wran/encoders.hpp"
#include "wran/keyvalue.hpp"
#include "wran/pipeline.hpp"
#include "wran/theory_oracle.hpp"

namespace wran::cli {

enum class Mode { kRe, kKgc };

// Everything a subcommand needs, merged from (lowest to highest priority) the
// config file, WRAN_OUT_DIR / WRAN_SEED, and command-line overrides.
//
// Sections: [run] mode, seed, out_dir, test_fraction; [corpus] CorpusSpec;
// [kg] KgSpec; [encoder] EncoderConfig; [train] TrainConfig; [eval] top_k,
// hits; [theory] EmpiricalConfig fields.
struct RunConfig {
  KeyValues values;
  Mode mode = Mode::kRe;
  std::uint64_t seed = 0;
  std::string out_dir = ".";
  double test_fraction = 0.5;
  CorpusSpec corpus;
  KgSpec kg;
  EncoderConfig encoder;
  TrainConfig train;
  std::vector<std::size_t> top_k = {10, 20, 50};
  std::vector<std::size_t> hits = {1, 3, 10};
  EmpiricalConfig theory;
};

struct Overrides {
  std::optional<std::string> config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  std::vector<std::string> assignments;  // "section.key=value"
};

// Throws ParseError / ContractError on malformed input or a missing seed.
RunConfig load_run_config(const Overrides& o);

const char* mode_name(Mode m);

KeyValues encoder_to_keyvalues(const EncoderConfig& e);
EncoderConfig encoder_from_keyvalues(const KeyValues& kv, const std::string& prefix, EncoderConfig base);

// Sizes the encoder from the data description (vocabulary, entity and
// relation counts) for the configured mode.
EncoderConfig sized_encoder(const RunConfig& cfg);
std::size_t num_classes(const RunConfig& cfg);

}  // namespace wran::cli
