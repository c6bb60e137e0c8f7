#pragma once

#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "haaqinet/dsp.hpp"

namespace haaqi {

// One step of a degradation recipe. A plain tagged struct keeps the JSON
// round trip simple.
struct Stage {
  enum class Kind {
    kAddNoise,
    kPeakClip,
    kQuantize,
    kWdrc,
    kSpectralSubtract,
    kFilter,
  };
  Kind kind = Kind::kAddNoise;
  NoiseKind noise_kind = NoiseKind::kLtass;
  double snr_db = 6.0;
  double clip_threshold = 0.5;
  int bits = 8;
  WdrcConfig wdrc_cfg;
  SpecsubConfig specsub_cfg;
  FilterSpec filter_spec;
};

struct ProcessingCondition {
  std::string id;
  std::string group;  // "noise-nonlinear", "linear-filter", "combined"
  bool unseen = false;
  std::vector<Stage> stages;
};

// Stages apply left to right. Noise stages draw from a seed derived from
// (seed, condition id, stage index), so a single master seed pins the corpus.
inline Waveform apply_condition(const Waveform& w, const ProcessingCondition& c,
                                std::uint64_t seed) {
  require(!c.stages.empty(), "condition: empty stage list");
  Waveform x = w;
  int idx = 0;
  for (const auto& s : c.stages) {
    switch (s.kind) {
      case Stage::Kind::kAddNoise:
        x = add_noise(x, s.noise_kind, s.snr_db,
                      derive_seed(seed, c.id + "/stage" + std::to_string(idx)));
        break;
      case Stage::Kind::kPeakClip:
        x = peak_clip(x, s.clip_threshold);
        break;
      case Stage::Kind::kQuantize:
        x = quantize(x, s.bits);
        break;
      case Stage::Kind::kWdrc:
        x = wdrc(x, s.wdrc_cfg);
        break;
      case Stage::Kind::kSpectralSubtract:
        x = spectral_subtract(x, s.specsub_cfg);
        break;
      case Stage::Kind::kFilter:
        x = linear_filter(x, s.filter_spec);
        break;
    }
    ++idx;
  }
  return x;
}

// ---------------------------------------------------------------------------
// Default condition bank: 32 noise/nonlinear + 32 linear-filter + 36 combined.
// The parameter grid is configuration, not ground truth; swap values by
// loading a custom bank file.
// ---------------------------------------------------------------------------

namespace detail {

inline Stage noise_stage(NoiseKind k, double snr) {
  Stage s;
  s.kind = Stage::Kind::kAddNoise;
  s.noise_kind = k;
  s.snr_db = snr;
  return s;
}
inline Stage clip_stage(double thr) {
  Stage s;
  s.kind = Stage::Kind::kPeakClip;
  s.clip_threshold = thr;
  return s;
}
inline Stage quant_stage(int bits) {
  Stage s;
  s.kind = Stage::Kind::kQuantize;
  s.bits = bits;
  return s;
}
inline Stage wdrc_stage(double ratio = 3.0) {
  Stage s;
  s.kind = Stage::Kind::kWdrc;
  s.wdrc_cfg.ratio = ratio;
  return s;
}
inline Stage specsub_stage() {
  Stage s;
  s.kind = Stage::Kind::kSpectralSubtract;
  return s;
}
inline Stage filter_stage(FilterSpec spec) {
  Stage s;
  s.kind = Stage::Kind::kFilter;
  s.filter_spec = std::move(spec);
  return s;
}

inline FilterSpec lp(double fc) {
  FilterSpec f;
  f.kind = FilterSpec::Kind::kLowPass;
  f.fc = fc;
  return f;
}
inline FilterSpec hp(double fc) {
  FilterSpec f;
  f.kind = FilterSpec::Kind::kHighPass;
  f.fc = fc;
  return f;
}
inline FilterSpec bp(double f1, double f2) {
  FilterSpec f;
  f.kind = FilterSpec::Kind::kBandPass;
  f.f1 = f1;
  f.f2 = f2;
  return f;
}
inline FilterSpec tilt(double db_per_oct) {
  FilterSpec f;
  f.kind = FilterSpec::Kind::kTilt;
  f.tilt_db_per_octave = db_per_oct;
  return f;
}
inline FilterSpec peak(double center, double gain_db = 10.0) {
  FilterSpec f;
  f.kind = FilterSpec::Kind::kResonance;
  f.center = center;
  f.gain_db = gain_db;
  return f;
}
inline FilterSpec multi_peak() {
  FilterSpec f;
  f.kind = FilterSpec::Kind::kMultiResonance;
  return f;
}
inline FilterSpec multi_peak_lp(double fc) {
  FilterSpec f;
  f.kind = FilterSpec::Kind::kMultiResonanceLowPass;
  f.fc = fc;
  return f;
}

}  // namespace detail

inline std::vector<ProcessingCondition> default_condition_bank() {
  using namespace detail;
  std::vector<ProcessingCondition> bank;
  int n = 0;
  auto add = [&](const std::string& group, const std::string& name,
                 std::vector<Stage> stages, bool unseen = false) {
    ProcessingCondition c;
    std::ostringstream id;
    const char* prefix = group == "noise-nonlinear"  ? "nn"
                         : group == "linear-filter" ? "lf"
                                                    : "cm";
    id << prefix << (n < 10 ? "0" : "") << n << "-" << name;
    ++n;
    c.id = id.str();
    c.group = group;
    c.unseen = unseen;
    c.stages = std::move(stages);
    bank.push_back(std::move(c));
  };

  const std::vector<double> snrs = {-6, 0, 6, 12};
  auto snr_tag = [](double snr) {
    std::ostringstream o;
    o << "snr" << (snr < 0 ? "m" : "") << std::abs(int(snr));
    return o.str();
  };

  // -- Group 1: noise addition and nonlinear processing (32) --
  n = 0;
  const std::string g1 = "noise-nonlinear";
  for (double snr : snrs)
    add(g1, "ltass-" + snr_tag(snr), {noise_stage(NoiseKind::kLtass, snr)});
  for (double snr : snrs)
    add(g1, "babble-" + snr_tag(snr), {noise_stage(NoiseKind::kBabble, snr)});
  for (double thr : {0.1, 0.25, 0.5, 0.75}) {
    std::ostringstream name;
    name << "clip-" << int(thr * 100);
    add(g1, name.str(), {clip_stage(thr)});
  }
  for (int bits : {4, 6, 8, 10})
    add(g1, "quant-" + std::to_string(bits), {quant_stage(bits)});
  for (double ratio : {1.5, 2.0, 3.0, 5.0}) {
    std::ostringstream name;
    name << "comp-r" << ratio;
    add(g1, name.str(), {wdrc_stage(ratio)});
  }
  for (double snr : snrs)
    add(g1, "comp-babble-" + snr_tag(snr),
        {noise_stage(NoiseKind::kBabble, snr), wdrc_stage()}, /*unseen=*/true);
  for (double snr : snrs)
    add(g1, "ssub-babble-" + snr_tag(snr),
        {noise_stage(NoiseKind::kBabble, snr), specsub_stage()});
  for (double snr : snrs)
    add(g1, "comp-ssub-babble-" + snr_tag(snr),
        {noise_stage(NoiseKind::kBabble, snr), specsub_stage(), wdrc_stage()},
        /*unseen=*/true);

  // -- Group 2: linear filtering (32) --
  n = 0;
  const std::string g2 = "linear-filter";
  for (double fc : {1000.0, 2000.0, 3000.0, 4000.0, 5000.0, 6000.0})
    add(g2, "lp-" + std::to_string(int(fc)), {filter_stage(lp(fc))});
  for (double fc : {200.0, 350.0, 500.0, 700.0, 1000.0})
    add(g2, "hp-" + std::to_string(int(fc)), {filter_stage(hp(fc))});
  add(g2, "bp-200-2000", {filter_stage(bp(200, 2000))});
  add(g2, "bp-500-4000", {filter_stage(bp(500, 4000))});
  add(g2, "bp-1000-6000", {filter_stage(bp(1000, 6000))});
  add(g2, "bp-200-4000", {filter_stage(bp(200, 4000))});
  for (double slope : {2.0, 4.0, 6.0})
    add(g2, "tilt-pos" + std::to_string(int(slope)), {filter_stage(tilt(slope))});
  for (double slope : {2.0, 4.0, 6.0})
    add(g2, "tilt-neg" + std::to_string(int(slope)), {filter_stage(tilt(-slope))});
  for (double c : {500.0, 1000.0, 2000.0})
    for (double g : {6.0, 10.0}) {
      std::ostringstream name;
      name << "peak-" << int(c) << "-g" << int(g);
      add(g2, name.str(), {filter_stage(peak(c, g))});
    }
  add(g2, "multipeak", {filter_stage(multi_peak())});
  for (double fc : {2000.0, 3000.0, 4000.0, 6000.0})
    add(g2, "multipeak-lp-" + std::to_string(int(fc)),
        {filter_stage(multi_peak_lp(fc))}, /*unseen=*/true);

  // -- Group 3: combined noise/nonlinear x linear filtering (36) --
  n = 0;
  const std::string g3 = "combined";
  struct NoisePart {
    std::string name;
    std::vector<Stage> stages;
    bool unseen;
  };
  std::vector<NoisePart> noise_parts = {
      {"ltass", {noise_stage(NoiseKind::kLtass, 6)}, false},
      {"babble", {noise_stage(NoiseKind::kBabble, 6)}, false},
      {"clip", {clip_stage(0.25)}, false},
      {"quant", {quant_stage(6)}, false},
      {"comp", {wdrc_stage()}, false},
      {"comp-babble",
       {noise_stage(NoiseKind::kBabble, 6), wdrc_stage()},
       true},
  };
  struct FilterPart {
    std::string name;
    FilterSpec spec;
  };
  std::vector<FilterPart> filter_parts = {
      {"hp-500", hp(500)},        {"lp-4000", lp(4000)},
      {"tilt-pos6", tilt(6)},     {"tilt-neg6", tilt(-6)},
      {"peak-1000", peak(1000)},  {"multipeak", multi_peak()},
  };
  for (const auto& np : noise_parts)
    for (const auto& fp : filter_parts) {
      auto stages = np.stages;
      stages.push_back(filter_stage(fp.spec));
      add(g3, np.name + "+" + fp.name, std::move(stages), np.unseen);
    }

  // Exactly 100 unique ids, 18 reserved as unseen.
  std::set<std::string> ids;
  int unseen = 0;
  for (const auto& c : bank) {
    ids.insert(c.id);
    unseen += c.unseen ? 1 : 0;
  }
  require(bank.size() == 100 && ids.size() == 100,
          "condition bank: expected 100 unique conditions");
  require(unseen == 18, "condition bank: expected 18 unseen conditions");
  return bank;
}

// ---------------------------------------------------------------------------
// JSON round trip
// ---------------------------------------------------------------------------

inline nlohmann::json to_json(const FilterSpec& f) {
  using K = FilterSpec::Kind;
  nlohmann::json j;
  switch (f.kind) {
    case K::kLowPass: j["type"] = "low-pass"; j["fc"] = f.fc; break;
    case K::kHighPass: j["type"] = "high-pass"; j["fc"] = f.fc; break;
    case K::kBandPass:
      j["type"] = "band-pass";
      j["f1"] = f.f1;
      j["f2"] = f.f2;
      break;
    case K::kTilt:
      j["type"] = "tilt";
      j["db_per_octave"] = f.tilt_db_per_octave;
      break;
    case K::kResonance:
      j["type"] = "resonance";
      j["center"] = f.center;
      j["q"] = f.q;
      j["gain_db"] = f.gain_db;
      break;
    case K::kMultiResonance:
      j["type"] = "multi-resonance";
      j["centers"] = f.centers;
      j["q"] = f.q;
      j["gain_db"] = f.gain_db;
      break;
    case K::kMultiResonanceLowPass:
      j["type"] = "multi-resonance-low-pass";
      j["centers"] = f.centers;
      j["q"] = f.q;
      j["gain_db"] = f.gain_db;
      j["fc"] = f.fc;
      break;
  }
  if (f.taps > 0) j["taps"] = f.taps;
  return j;
}

inline FilterSpec filter_from_json(const nlohmann::json& j) {
  FilterSpec f;
  using K = FilterSpec::Kind;
  std::string type = j.at("type").get<std::string>();
  auto opt = [&](const char* key, double dflt) {
    return j.contains(key) ? j.at(key).get<double>() : dflt;
  };
  if (type == "low-pass") {
    f.kind = K::kLowPass;
    f.fc = j.at("fc").get<double>();
  } else if (type == "high-pass") {
    f.kind = K::kHighPass;
    f.fc = j.at("fc").get<double>();
  } else if (type == "band-pass") {
    f.kind = K::kBandPass;
    f.f1 = j.at("f1").get<double>();
    f.f2 = j.at("f2").get<double>();
  } else if (type == "tilt") {
    f.kind = K::kTilt;
    f.tilt_db_per_octave = j.at("db_per_octave").get<double>();
  } else if (type == "resonance") {
    f.kind = K::kResonance;
    f.center = j.at("center").get<double>();
    f.q = opt("q", 10.0);
    f.gain_db = opt("gain_db", 10.0);
  } else if (type == "multi-resonance" || type == "multi-resonance-low-pass") {
    f.kind = type == "multi-resonance" ? K::kMultiResonance
                                       : K::kMultiResonanceLowPass;
    if (j.contains("centers")) f.centers = j.at("centers").get<std::vector<double>>();
    f.q = opt("q", 10.0);
    f.gain_db = opt("gain_db", 10.0);
    if (f.kind == K::kMultiResonanceLowPass) f.fc = j.at("fc").get<double>();
  } else {
    throw Error("condition bank: unknown filter type '" + type + "'");
  }
  if (j.contains("taps")) f.taps = j.at("taps").get<int>();
  return f;
}

inline nlohmann::json to_json(const Stage& s) {
  nlohmann::json j;
  switch (s.kind) {
    case Stage::Kind::kAddNoise:
      j["type"] = "add-noise";
      j["kind"] = to_string(s.noise_kind);
      j["snr_db"] = s.snr_db;
      break;
    case Stage::Kind::kPeakClip:
      j["type"] = "peak-clip";
      j["threshold"] = s.clip_threshold;
      break;
    case Stage::Kind::kQuantize:
      j["type"] = "quantize";
      j["bits"] = s.bits;
      break;
    case Stage::Kind::kWdrc:
      j["type"] = "wdrc";
      j["channels"] = s.wdrc_cfg.channels;
      j["ratio"] = s.wdrc_cfg.ratio;
      j["knee_db"] = s.wdrc_cfg.knee_db;
      j["attack_ms"] = s.wdrc_cfg.attack_ms;
      j["release_ms"] = s.wdrc_cfg.release_ms;
      break;
    case Stage::Kind::kSpectralSubtract:
      j["type"] = "spectral-subtract";
      j["alpha"] = s.specsub_cfg.alpha;
      j["beta"] = s.specsub_cfg.beta;
      j["leading_frames"] = s.specsub_cfg.leading_frames;
      break;
    case Stage::Kind::kFilter:
      j["type"] = "filter";
      j["spec"] = to_json(s.filter_spec);
      break;
  }
  return j;
}

inline Stage stage_from_json(const nlohmann::json& j) {
  Stage s;
  std::string type = j.at("type").get<std::string>();
  if (type == "add-noise") {
    s.kind = Stage::Kind::kAddNoise;
    s.noise_kind = j.at("kind").get<std::string>() == "babble"
                       ? NoiseKind::kBabble
                       : NoiseKind::kLtass;
    s.snr_db = j.at("snr_db").get<double>();
  } else if (type == "peak-clip") {
    s.kind = Stage::Kind::kPeakClip;
    s.clip_threshold = j.at("threshold").get<double>();
  } else if (type == "quantize") {
    s.kind = Stage::Kind::kQuantize;
    s.bits = j.at("bits").get<int>();
  } else if (type == "wdrc") {
    s.kind = Stage::Kind::kWdrc;
    if (j.contains("channels")) s.wdrc_cfg.channels = j.at("channels").get<int>();
    if (j.contains("ratio")) s.wdrc_cfg.ratio = j.at("ratio").get<double>();
    if (j.contains("knee_db")) s.wdrc_cfg.knee_db = j.at("knee_db").get<double>();
    if (j.contains("attack_ms")) s.wdrc_cfg.attack_ms = j.at("attack_ms").get<double>();
    if (j.contains("release_ms"))
      s.wdrc_cfg.release_ms = j.at("release_ms").get<double>();
  } else if (type == "spectral-subtract") {
    s.kind = Stage::Kind::kSpectralSubtract;
    if (j.contains("alpha")) s.specsub_cfg.alpha = j.at("alpha").get<double>();
    if (j.contains("beta")) s.specsub_cfg.beta = j.at("beta").get<double>();
    if (j.contains("leading_frames"))
      s.specsub_cfg.leading_frames = j.at("leading_frames").get<int>();
  } else if (type == "filter") {
    s.kind = Stage::Kind::kFilter;
    s.filter_spec = filter_from_json(j.at("spec"));
  } else {
    throw Error("condition bank: unknown stage type '" + type + "'");
  }
  return s;
}

inline nlohmann::json to_json(const std::vector<ProcessingCondition>& bank) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& c : bank) {
    nlohmann::json j;
    j["id"] = c.id;
    j["group"] = c.group;
    j["unseen"] = c.unseen;
    j["stages"] = nlohmann::json::array();
    for (const auto& s : c.stages) j["stages"].push_back(to_json(s));
    arr.push_back(std::move(j));
  }
  return arr;
}

inline std::vector<ProcessingCondition> bank_from_json(const nlohmann::json& arr) {
  std::vector<ProcessingCondition> bank;
  std::set<std::string> ids;
  for (const auto& j : arr) {
    ProcessingCondition c;
    c.id = j.at("id").get<std::string>();
    c.group = j.contains("group") ? j.at("group").get<std::string>() : "";
    c.unseen = j.contains("unseen") && j.at("unseen").get<bool>();
    for (const auto& sj : j.at("stages")) c.stages.push_back(stage_from_json(sj));
    require(!c.stages.empty(), "condition bank: empty stage list for " + c.id);
    require(ids.insert(c.id).second, "condition bank: duplicate id " + c.id);
    bank.push_back(std::move(c));
  }
  require(!bank.empty(), "condition bank: empty");
  return bank;
}

}  // namespace haaqi
