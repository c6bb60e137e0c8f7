#pragma once

#include <algorithm>
#include <chrono>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "haaqinet/dsp.hpp"
#include "haaqinet/metrics.hpp"

namespace haaqi {

// ---------------------------------------------------------------------------
// Slice-wise evaluation
// ---------------------------------------------------------------------------

struct EvalItem {
  std::string clip_id;
  std::string genre;
  std::string condition_id;
  std::string audiogram_category;
  std::string split;  // train / valid / test-seen / test-unseen
  double truth = 0.0;
  double pred = 0.0;
};

// Degenerate slices (fewer than two items, or constant scores) report their
// count with the metrics marked undefined instead of fake zeros.
struct SliceMetrics {
  std::string slice;
  int count = 0;
  bool defined = false;
  double lcc = 0.0, srcc = 0.0, mse = 0.0;
};

struct EvalReport {
  SliceMetrics overall;
  std::vector<SliceMetrics> slices;
  int total = 0;
};

namespace detail {

inline SliceMetrics slice_metrics(const std::string& name,
                                  const std::vector<double>& truth,
                                  const std::vector<double>& pred) {
  SliceMetrics m;
  m.slice = name;
  m.count = int(truth.size());
  if (truth.size() >= 2) {
    try {
      m.lcc = lcc(truth, pred);
      m.srcc = srcc(truth, pred);
      m.mse = mse(truth, pred);
      m.defined = true;
    } catch (const Error&) {
      m.defined = false;  // degenerate variance or ranks
    }
  }
  return m;
}

}  // namespace detail

inline EvalReport evaluate_items(std::vector<EvalItem> items) {
  require(!items.empty(), "evaluate: empty manifest");
  // Canonical order makes the report independent of manifest row order,
  // bit for bit.
  std::stable_sort(items.begin(), items.end(),
                   [](const EvalItem& a, const EvalItem& b) {
                     return a.clip_id < b.clip_id;
                   });
  EvalReport report;
  report.total = int(items.size());

  std::vector<double> truth, pred;
  for (const auto& it : items) {
    truth.push_back(it.truth);
    pred.push_back(it.pred);
  }
  report.overall = detail::slice_metrics("overall", truth, pred);

  auto add_slices = [&](const std::string& prefix,
                        const std::function<std::string(const EvalItem&)>& key) {
    std::map<std::string, std::pair<std::vector<double>, std::vector<double>>>
        groups;
    for (const auto& it : items) {
      std::string k = key(it);
      if (k.empty()) k = "unknown";
      groups[k].first.push_back(it.truth);
      groups[k].second.push_back(it.pred);
    }
    for (const auto& [k, v] : groups)
      report.slices.push_back(
          detail::slice_metrics(prefix + "/" + k, v.first, v.second));
  };
  add_slices("genre", [](const EvalItem& it) { return it.genre; });
  add_slices("audiogram",
             [](const EvalItem& it) { return it.audiogram_category; });
  add_slices("condition", [](const EvalItem& it) { return it.condition_id; });
  add_slices("split", [](const EvalItem& it) { return it.split; });
  return report;
}

inline nlohmann::json to_json(const SliceMetrics& m) {
  nlohmann::json j;
  j["slice"] = m.slice;
  j["count"] = m.count;
  if (m.defined) {
    j["lcc"] = m.lcc;
    j["srcc"] = m.srcc;
    j["mse"] = m.mse;
  } else {
    j["lcc"] = nullptr;
    j["srcc"] = nullptr;
    j["mse"] = nullptr;
  }
  return j;
}

inline nlohmann::json to_json(const EvalReport& r) {
  nlohmann::json j;
  j["total"] = r.total;
  j["overall"] = to_json(r.overall);
  j["slices"] = nlohmann::json::array();
  for (const auto& s : r.slices) j["slices"].push_back(to_json(s));
  return j;
}

inline void write_eval_csv(const std::string& path, const EvalReport& r) {
  std::ofstream f(path, std::ios::trunc);
  require(bool(f), "eval: cannot write " + path);
  f << "slice,count,lcc,srcc,mse\n";
  auto row = [&](const SliceMetrics& m) {
    f << m.slice << "," << m.count << ",";
    if (m.defined)
      f << m.lcc << "," << m.srcc << "," << m.mse;
    else
      f << ",,";
    f << "\n";
  };
  row(r.overall);
  for (const auto& s : r.slices) row(s);
}

// Plot-ready long format: slice,metric,value,count.
inline void write_eval_long_csv(const std::string& path, const EvalReport& r) {
  std::ofstream f(path, std::ios::trunc);
  require(bool(f), "eval: cannot write " + path);
  f << "slice,metric,value,count\n";
  auto rows = [&](const SliceMetrics& m) {
    if (!m.defined) return;
    f << m.slice << ",lcc," << m.lcc << "," << m.count << "\n";
    f << m.slice << ",srcc," << m.srcc << "," << m.count << "\n";
    f << m.slice << ",mse," << m.mse << "," << m.count << "\n";
  };
  rows(r.overall);
  for (const auto& s : r.slices) rows(s);
}

// ---------------------------------------------------------------------------
// Anchor-quantile curve
// ---------------------------------------------------------------------------

struct AnchorPoint {
  double anchor = 0.0;      // truth quantile
  double mean_pred = 0.0;   // mean prediction within the tolerance band
  int count = 0;            // samples within tolerance (0 = empty anchor)
};

struct AnchorCurve {
  std::vector<AnchorPoint> points;
  double tolerance = 0.05;
};

// Empirical quantile with linear interpolation between order statistics.
inline double empirical_quantile(std::vector<double> sorted_vals, double level) {
  require(!sorted_vals.empty(), "quantile: empty input");
  double pos = level * double(sorted_vals.size() - 1);
  std::size_t lo = std::size_t(std::floor(pos));
  std::size_t hi = std::min(sorted_vals.size() - 1, lo + 1);
  double frac = pos - double(lo);
  return sorted_vals[lo] * (1.0 - frac) + sorted_vals[hi] * frac;
}

inline AnchorCurve anchor_curve(const std::vector<double>& preds,
                                const std::vector<double>& truths, int q = 10,
                                double tol = 0.05) {
  require(preds.size() == truths.size(), "anchor_curve: length mismatch");
  require(!preds.empty(), "anchor_curve: empty input");
  require(q >= 2, "anchor_curve: need q >= 2");
  require(tol > 0.0, "anchor_curve: tolerance must be positive");

  std::vector<double> sorted = truths;
  std::sort(sorted.begin(), sorted.end());

  AnchorCurve curve;
  curve.tolerance = tol;
  for (int k = 1; k <= q; ++k) {
    AnchorPoint p;
    p.anchor = empirical_quantile(sorted, double(k) / double(q + 1));
    // Tied quantiles (discrete score data) collapse into one anchor so the
    // anchor sequence stays strictly increasing.
    if (!curve.points.empty() && curve.points.back().anchor == p.anchor)
      continue;
    double acc = 0.0;
    for (std::size_t i = 0; i < truths.size(); ++i) {
      if (std::abs(truths[i] - p.anchor) <= tol) {
        acc += preds[i];
        ++p.count;
      }
    }
    if (p.count > 0) p.mean_pred = acc / double(p.count);
    curve.points.push_back(p);
  }
  return curve;
}

inline void write_anchor_csv(const std::string& path, const AnchorCurve& c) {
  std::ofstream f(path, std::ios::trunc);
  require(bool(f), "anchor: cannot write " + path);
  f << "anchor,mean_pred,count,tolerance\n";
  for (const auto& p : c.points) {
    f << p.anchor << ",";
    if (p.count > 0)
      f << p.mean_pred;
    f << "," << p.count << "," << c.tolerance << "\n";
  }
}

// ---------------------------------------------------------------------------
// SPL robustness sweep
// ---------------------------------------------------------------------------

struct SplSweepRow {
  double level_db = 0.0;
  int count = 0;
  double mean_pred = 0.0;
  // Agreement with the 65 dB reference predictions.
  bool ref_defined = false;
  double lcc_vs_ref = 0.0, srcc_vs_ref = 0.0, mse_vs_ref = 0.0;
  // Agreement with true scores, when available.
  bool truth_defined = false;
  double lcc_vs_truth = 0.0, srcc_vs_truth = 0.0, mse_vs_truth = 0.0;
};

struct SplSweepReport {
  std::vector<SplSweepRow> rows;
};

inline const std::vector<double>& default_spl_levels() {
  static const std::vector<double> levels = {35, 45, 55, 65, 75, 85, 95};
  return levels;
}

// Clips are first normalized to the 65 dB anchor, so the 65 dB row
// reproduces the unadjusted predictions exactly (gain 1).
inline SplSweepReport spl_sweep(
    const std::function<double(const Waveform&)>& predict,
    const std::vector<Waveform>& clips, const std::vector<double>& levels,
    const std::vector<double>* truths = nullptr) {
  require(!clips.empty(), "spl_sweep: no clips");
  require(!levels.empty(), "spl_sweep: no levels");
  if (truths) require(truths->size() == clips.size(), "spl_sweep: truth size");

  std::vector<Waveform> anchored;
  anchored.reserve(clips.size());
  for (const auto& w : clips) anchored.push_back(adjust_spl(w, kSplRefDb));

  std::vector<double> ref_preds;
  ref_preds.reserve(clips.size());
  for (const auto& w : anchored) ref_preds.push_back(predict(w));

  SplSweepReport report;
  for (double level : levels) {
    SplSweepRow row;
    row.level_db = level;
    row.count = int(clips.size());
    std::vector<double> preds;
    for (const auto& w : anchored) {
      Waveform adjusted = adjust_spl(w, level);
      double check = measure_spl(adjusted).spl_db;
      require(std::abs(check - level) <= 0.01, "spl_sweep: adjust drifted");
      preds.push_back(predict(adjusted));
    }
    for (double p : preds) row.mean_pred += p;
    row.mean_pred /= double(preds.size());
    if (preds.size() >= 2) {
      try {
        row.lcc_vs_ref = lcc(ref_preds, preds);
        row.srcc_vs_ref = srcc(ref_preds, preds);
        row.mse_vs_ref = mse(ref_preds, preds);
        row.ref_defined = true;
      } catch (const Error&) {
        row.ref_defined = false;
      }
      if (truths) {
        try {
          row.lcc_vs_truth = lcc(*truths, preds);
          row.srcc_vs_truth = srcc(*truths, preds);
          row.mse_vs_truth = mse(*truths, preds);
          row.truth_defined = true;
        } catch (const Error&) {
          row.truth_defined = false;
        }
      }
    }
    report.rows.push_back(row);
  }
  return report;
}

inline nlohmann::json to_json(const SplSweepReport& r) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : r.rows) {
    nlohmann::json j;
    j["level_db"] = row.level_db;
    j["count"] = row.count;
    j["mean_pred"] = row.mean_pred;
    if (row.ref_defined) {
      j["lcc_vs_ref"] = row.lcc_vs_ref;
      j["srcc_vs_ref"] = row.srcc_vs_ref;
      j["mse_vs_ref"] = row.mse_vs_ref;
    }
    if (row.truth_defined) {
      j["lcc_vs_truth"] = row.lcc_vs_truth;
      j["srcc_vs_truth"] = row.srcc_vs_truth;
      j["mse_vs_truth"] = row.mse_vs_truth;
    }
    rows.push_back(std::move(j));
  }
  return {{"rows", rows}};
}

inline void write_spl_sweep_csv(const std::string& path,
                                const SplSweepReport& r) {
  std::ofstream f(path, std::ios::trunc);
  require(bool(f), "spl_sweep: cannot write " + path);
  f << "level_db,count,mean_pred,lcc_vs_ref,srcc_vs_ref,mse_vs_ref,"
       "lcc_vs_truth,srcc_vs_truth,mse_vs_truth\n";
  for (const auto& row : r.rows) {
    f << row.level_db << "," << row.count << "," << row.mean_pred << ",";
    if (row.ref_defined)
      f << row.lcc_vs_ref << "," << row.srcc_vs_ref << "," << row.mse_vs_ref;
    else
      f << ",,";
    f << ",";
    if (row.truth_defined)
      f << row.lcc_vs_truth << "," << row.srcc_vs_truth << ","
        << row.mse_vs_truth;
    else
      f << ",,";
    f << "\n";
  }
}

// ---------------------------------------------------------------------------
// Runtime benchmarking
// ---------------------------------------------------------------------------

struct BenchVariant {
  std::string name;
  std::function<Mat(const Waveform&)> extract;
  std::function<double(const Mat&)> predict;
};

struct BenchRow {
  std::string name;
  int clips = 0;
  int reps = 0;
  double extract_mean_s = 0.0, extract_std_s = 0.0;
  double predict_mean_s = 0.0, predict_std_s = 0.0;
  double total_mean_s = 0.0;
};

struct BenchReport {
  std::vector<BenchRow> rows;
};

inline BenchReport bench_runtime(const std::vector<BenchVariant>& variants,
                                 const std::vector<Waveform>& clips,
                                 int reps = 3, int warmup = 1) {
  require(!variants.empty(), "bench: no variants");
  require(!clips.empty(), "bench: no clips");
  require(reps >= 1, "bench: reps >= 1");
  using clock = std::chrono::steady_clock;

  BenchReport report;
  for (const auto& v : variants) {
    std::vector<double> feat_times, pred_times;  // per clip, per rep
    for (int rep = 0; rep < warmup + reps; ++rep) {
      for (const auto& w : clips) {
        auto t0 = clock::now();
        Mat features = v.extract(w);
        auto t1 = clock::now();
        volatile double sink = v.predict(features);
        (void)sink;
        auto t2 = clock::now();
        if (rep >= warmup) {
          feat_times.push_back(std::chrono::duration<double>(t1 - t0).count());
          pred_times.push_back(std::chrono::duration<double>(t2 - t1).count());
        }
      }
    }
    auto stats = [](const std::vector<double>& xs) {
      double mean = 0.0;
      for (double x : xs) mean += x;
      mean /= double(xs.size());
      double var = 0.0;
      for (double x : xs) var += (x - mean) * (x - mean);
      var /= double(xs.size());
      return std::make_pair(mean, std::sqrt(var));
    };
    BenchRow row;
    row.name = v.name;
    row.clips = int(clips.size());
    row.reps = reps;
    std::tie(row.extract_mean_s, row.extract_std_s) = stats(feat_times);
    std::tie(row.predict_mean_s, row.predict_std_s) = stats(pred_times);
    row.total_mean_s = row.extract_mean_s + row.predict_mean_s;
    report.rows.push_back(row);
  }
  return report;
}

inline nlohmann::json to_json(const BenchReport& r) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : r.rows)
    rows.push_back({{"variant", row.name},
                    {"clips", row.clips},
                    {"reps", row.reps},
                    {"extract_mean_s", row.extract_mean_s},
                    {"extract_std_s", row.extract_std_s},
                    {"predict_mean_s", row.predict_mean_s},
                    {"predict_std_s", row.predict_std_s},
                    {"total_mean_s", row.total_mean_s}});
  return {{"rows", rows}};
}

inline void write_bench_csv(const std::string& path, const BenchReport& r) {
  std::ofstream f(path, std::ios::trunc);
  require(bool(f), "bench: cannot write " + path);
  f << "variant,clips,reps,extract_mean_s,extract_std_s,predict_mean_s,"
       "predict_std_s,total_mean_s\n";
  for (const auto& row : r.rows)
    f << row.name << "," << row.clips << "," << row.reps << ","
      << row.extract_mean_s << "," << row.extract_std_s << ","
      << row.predict_mean_s << "," << row.predict_std_s << ","
      << row.total_mean_s << "\n";
}

}  // namespace haaqi
