#include "nsdx/synth.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "nsdx/csv.hpp"
#include "nsdx/errors.hpp"
#include "nsdx/fs_util.hpp"
#include "nsdx/rng.hpp"

namespace fs = std::filesystem;

namespace nsdx {

namespace {

struct Region {
  int x0, y0, x1, y1;  // half-open
};

// Geometry scales with the image side so patterns survive resizing.
struct Layout {
  Region left_lung, right_lung, aso, ggo, pneumonia, tb_left, tb_right;
};

Layout layout_for(int n) {
  auto at = [n](int num, int den) { return n * num / den; };
  Layout l;
  l.left_lung = {at(1, 8), at(1, 8), at(7, 16), at(7, 8)};
  l.right_lung = {at(9, 16), at(1, 8), at(7, 8), at(7, 8)};
  l.aso = {at(3, 16), at(9, 16), at(3, 8), at(13, 16)};
  l.ggo = {at(5, 8), at(3, 16), at(13, 16), at(7, 16)};
  l.pneumonia = {at(5, 8), at(9, 16), at(13, 16), at(13, 16)};
  l.tb_left = {at(3, 16), at(1, 8), at(5, 16), at(1, 4)};
  l.tb_right = {at(11, 16), at(1, 8), at(13, 16), at(1, 4)};
  return l;
}

void fill(std::vector<double>& px, int n, const Region& r, double v) {
  for (int y = r.y0; y < r.y1; ++y)
    for (int x = r.x0; x < r.x1; ++x) px[static_cast<std::size_t>(y) * n + x] = v;
}

void add(std::vector<double>& px, int n, const Region& r, double dv) {
  for (int y = r.y0; y < r.y1; ++y)
    for (int x = r.x0; x < r.x1; ++x) px[static_cast<std::size_t>(y) * n + x] += dv;
}

void set_symptom(std::array<double, kNumSymptoms>& t, std::string_view name) {
  t[*symptom_index(name)] = 1.0;
}

SynthCase make_case(Cohort cohort, std::size_t index, int n, Rng& rng) {
  const auto l = layout_for(n);
  std::vector<double> px(static_cast<std::size_t>(n) * n, 0.1);
  fill(px, n, l.left_lung, 0.55);
  fill(px, n, l.right_lung, 0.55);

  SynthCase c;
  switch (cohort) {
    case Cohort::Covid: {
      static constexpr std::array<MorphClass, 3> kCycle = {MorphClass::Aso, MorphClass::Ggo, MorphClass::AsoGgo};
      c.morph = kCycle[index % kCycle.size()];
      if (c.morph != MorphClass::Ggo) {
        fill(px, n, l.aso, 0.95);
        set_symptom(c.symptom_targets, "Infiltration");
      }
      if (c.morph != MorphClass::Aso) {
        add(px, n, l.ggo, 0.25);
        set_symptom(c.symptom_targets, "Edema");
      }
      break;
    }
    case Cohort::Healthy:
      c.morph = MorphClass::NoAsoGgo;
      break;
    case Cohort::Tuberculosis:
      c.morph = MorphClass::MissingAsoGgo;
      fill(px, n, l.tb_left, 0.9);
      fill(px, n, l.tb_right, 0.9);
      set_symptom(c.symptom_targets, "Fibrosis");
      set_symptom(c.symptom_targets, "Nodule");
      break;
    case Cohort::Pneumonia:
      c.morph = MorphClass::MissingAsoGgo;
      fill(px, n, l.pneumonia, 0.95);
      set_symptom(c.symptom_targets, "Pneumonia");
      set_symptom(c.symptom_targets, "Consolidation");
      break;
  }
  for (auto& p : px) p = std::clamp(p + rng.uniform(-0.04, 0.04), 0.0, 1.0);

  char id[64];
  std::snprintf(id, sizeof id, "%s-%04zu", std::string(to_string(cohort)).c_str(), index);
  c.record.case_id = id;
  c.record.cohort = cohort;
  c.record.truth = truth_for(cohort);
  c.record.image = quantize(GrayImage(n, n, std::move(px)));
  return c;
}

std::vector<double> one_hot(MorphClass c) {
  std::vector<double> t(kNumMorphClasses, 0.0);
  t[static_cast<std::size_t>(c)] = 1.0;
  return t;
}

}  // namespace

SynthSpec parse_synth_spec(const std::string& json_text) {
  SynthSpec s;
  try {
    const auto j = nlohmann::json::parse(json_text);
    if (!j.is_object()) throw ConfigError("synth spec must be a JSON object");
    auto count = [&](const char* key) -> std::size_t {
      if (!j.contains(key)) return 0;
      const auto v = j.at(key).get<long long>();
      if (v < 0) throw ConfigError(std::string("negative count for '") + key + "'");
      return static_cast<std::size_t>(v);
    };
    s.covid = count("covid");
    s.healthy = count("healthy");
    s.tuberculosis = count("tuberculosis") + count("tb");
    s.pneumonia = count("pneumonia");
    s.seed = j.value("seed", std::uint64_t{0});
    s.size = j.value("size", 16);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad synth spec: ") + e.what());
  }
  if (s.size < 8) throw ConfigError("synthetic image size must be at least 8");
  return s;
}

std::vector<SynthCase> synth_dataset(const SynthSpec& spec) {
  if (spec.size < 8) throw ConfigError("synthetic image size must be at least 8");
  Rng rng(spec.seed);
  std::vector<SynthCase> out;
  const std::array<std::pair<Cohort, std::size_t>, 4> plan = {{{Cohort::Covid, spec.covid},
                                                               {Cohort::Healthy, spec.healthy},
                                                               {Cohort::Tuberculosis, spec.tuberculosis},
                                                               {Cohort::Pneumonia, spec.pneumonia}}};
  for (const auto& [cohort, count] : plan)
    for (std::size_t i = 0; i < count; ++i) out.push_back(make_case(cohort, i, spec.size, rng));
  return out;
}

void write_synth_dataset(const std::string& dir, const std::vector<SynthCase>& cases) {
  fs::create_directories(fs::path(dir) / "images");
  std::ostringstream index;
  std::vector<std::string> header{"case_id", "cohort", "truth", "morph"};
  for (auto n : kSymptomNames) header.emplace_back(n);
  index << csv::join(header) << '\n';
  for (const auto& c : cases) {
    index << c.record.case_id << ',' << to_string(c.record.cohort) << ',' << to_string(c.record.truth) << ','
          << to_string(c.morph);
    for (double t : c.symptom_targets) index << ',' << (t > 0.5 ? 1 : 0);
    index << '\n';
    write_file_atomic((fs::path(dir) / "images" / (c.record.case_id + ".pgm")).string(), to_pgm(c.record.image));
  }
  write_file_atomic((fs::path(dir) / "cases.csv").string(), index.str());
}

std::vector<SynthCase> read_synth_dataset(const std::string& dir) {
  const auto table = csv::read_file((fs::path(dir) / "cases.csv").string());
  if (table.header.size() != 4 + kNumSymptoms || table.header[0] != "case_id")
    throw ParseError(1, "cases.csv header does not match the dataset layout");
  std::vector<SynthCase> out;
  for (const auto& row : table.rows) {
    if (row.fields.size() != table.header.size()) throw ParseError(row.line, "wrong column count");
    SynthCase c;
    c.record.case_id = row.fields[0];
    c.record.cohort = parse_cohort(row.fields[1]);
    c.record.truth = parse_diagnosis(row.fields[2]);
    if (c.record.truth != truth_for(c.record.cohort))
      throw ValueError("line " + std::to_string(row.line) + ": truth does not match cohort");
    c.morph = parse_morph_class(row.fields[3]);
    for (std::size_t i = 0; i < kNumSymptoms; ++i) {
      const auto v = csv::parse_int(row.fields[4 + i], row.line);
      if (v != 0 && v != 1) throw ValueError("line " + std::to_string(row.line) + ": symptom target must be 0/1");
      c.symptom_targets[i] = static_cast<double>(v);
    }
    c.record.image = read_pgm_file((fs::path(dir) / "images" / (c.record.case_id + ".pgm")).string());
    out.push_back(std::move(c));
  }
  return out;
}

Example s_example(const SynthCase& c) {
  return {std::vector<double>(c.record.image.pixels().begin(), c.record.image.pixels().end()),
          std::vector<double>(c.symptom_targets.begin(), c.symptom_targets.end())};
}

Example e2e_example(const SynthCase& c) {
  return {std::vector<double>(c.record.image.pixels().begin(), c.record.image.pixels().end()),
          {c.record.truth == Diagnosis::Positive ? 1.0 : 0.0}};
}

Example r_example(const SynthCase& c, const SymptomVector& symptoms) {
  return {r_input(c.record.image, symptoms), one_hot(c.morph)};
}

}  // namespace nsdx
