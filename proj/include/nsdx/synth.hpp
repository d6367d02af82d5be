#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "nsdx/core_data.hpp"
#include "nsdx/toy_neural.hpp"

namespace nsdx {

struct SynthSpec {
  std::size_t covid = 0;
  std::size_t healthy = 0;
  std::size_t tuberculosis = 0;
  std::size_t pneumonia = 0;
  std::uint64_t seed = 0;
  int size = 16;  // square images, at least 8
};

// JSON object with keys covid, healthy, tuberculosis (or tb), pneumonia,
// and optional seed and size.
SynthSpec parse_synth_spec(const std::string& json_text);

struct SynthCase {
  CaseRecord record;
  MorphClass morph = MorphClass::NoAsoGgo;
  std::array<double, kNumSymptoms> symptom_targets{};
};

/// Low-resolution chest X-ray stand-ins with planted, learnable patterns.
///
/// Every image has two bright lung fields on a dark background. On top of
/// that, per cohort:
///   covid         cycles ASO, GGO, ASO_GGO by case index.
///                 ASO: saturated block low in the left lung (Infiltration).
///                 GGO: raised haze high in the right lung (Edema).
///   healthy       lungs only; No_ASO_GGO, no symptoms.
///   tuberculosis  bright apical spots in both lungs; Missing_ASO_GGO
///                 (Fibrosis, Nodule).
///   pneumonia     saturated block low in the right lung; Missing_ASO_GGO
///                 (Pneumonia, Consolidation).
/// Pixel noise is uniform +-0.04 and every pixel is snapped to the 8-bit
/// grid so PGM files reproduce the in-memory images exactly.
/// Case ids are "<cohort>-NNNN"; cohorts appear in the order above.
std::vector<SynthCase> synth_dataset(const SynthSpec& spec);

/// Layout: cases.csv (case_id,cohort,truth,morph,<14 symptom targets>) and
/// images/<case_id>.pgm.
void write_synth_dataset(const std::string& dir, const std::vector<SynthCase>& cases);
std::vector<SynthCase> read_synth_dataset(const std::string& dir);

Example s_example(const SynthCase& c);
Example e2e_example(const SynthCase& c);
Example r_example(const SynthCase& c, const SymptomVector& symptoms);

}  // namespace nsdx
