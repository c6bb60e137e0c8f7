#pragma once

#include <atomic>
#include <filesystem>
#include <map>
#include <mutex>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "haaqinet/audiogram.hpp"
#include "haaqinet/conditions.hpp"
#include "haaqinet/manifest.hpp"
#include "haaqinet/proxy.hpp"
#include "haaqinet/wav.hpp"

namespace haaqi {

struct CleanClip {
  std::string clip_id;
  std::string path;
  std::string genre;
};

struct CorpusConfig {
  std::uint64_t master_seed = 1;
  int conditions_per_clip = 3;   // per source clip (sampled mode)
  int audiograms_per_clip = 1;   // hearing-loss patterns per (clip, condition)
  bool exhaustive = false;       // cross every clip with every usable condition
  double test_clip_fraction = 0.2;
  double valid_clip_fraction = 0.2;  // of the remaining train clips
  double reference_spl_db = kSplRefDb;
};

struct CorpusResult {
  std::vector<ManifestRow> manifest;
  std::map<std::string, std::string> sources;  // clip_id -> clean path
};

// Builds the degraded+amplified audio tree under out_dir/audio and returns
// the manifest. Unseen conditions land exclusively in test-unseen rows, and
// test rows draw only from the held-out audiogram patterns.
inline CorpusResult corpus_build(const CorpusConfig& cfg,
                                 const std::vector<CleanClip>& clips,
                                 const std::vector<ProcessingCondition>& bank,
                                 const std::vector<AudiogramBankEntry>& audiograms,
                                 const std::string& out_dir,
                                 int jobs_count = 1) {
  require(!clips.empty(), "corpus: no clean clips");
  require(!bank.empty(), "corpus: empty condition bank");
  require(!audiograms.empty(), "corpus: empty audiogram bank");
  namespace fs = std::filesystem;
  fs::create_directories(fs::path(out_dir) / "audio");

  std::vector<const ProcessingCondition*> seen, unseen;
  for (const auto& c : bank)
    (c.unseen ? unseen : seen).push_back(&c);
  require(!seen.empty(), "corpus: no seen conditions");

  std::vector<const AudiogramBankEntry*> train_auds, test_auds;
  for (const auto& a : audiograms)
    (a.train_split ? train_auds : test_auds).push_back(&a);
  require(!train_auds.empty() && !test_auds.empty(),
          "corpus: audiogram bank needs both train and test patterns");

  // Deterministic clip split.
  std::vector<std::size_t> order(clips.size());
  std::iota(order.begin(), order.end(), 0);
  Rng split_rng(derive_seed(cfg.master_seed, "corpus/clip-split"));
  split_rng.shuffle(order);
  std::size_t n_test = std::size_t(std::lround(cfg.test_clip_fraction *
                                               double(clips.size())));
  if (clips.size() >= 2 && n_test == 0) n_test = 1;
  std::set<std::size_t> test_clips(order.begin(),
                                   order.begin() + std::ptrdiff_t(n_test));
  std::size_t n_valid = std::size_t(std::lround(
      cfg.valid_clip_fraction * double(clips.size() - n_test)));
  std::set<std::size_t> valid_clips;
  for (std::size_t i = n_test; i < order.size() && valid_clips.size() < n_valid;
       ++i)
    valid_clips.insert(order[i]);

  // Phase 1: a deterministic job list. Seeds derive from (master seed,
  // row id), so the result is identical however many workers run phase 2.
  struct Job {
    std::size_t clip_index = 0;
    const ProcessingCondition* cond = nullptr;
    const AudiogramBankEntry* aud = nullptr;
    std::string row_id;
    std::string wav_path;  // absolute, for writing
    std::string rel_path;  // stored in the manifest, relative to the run dir
    std::string split;
  };
  std::vector<Job> jobs;
  std::set<std::string> ids;
  for (std::size_t ci = 0; ci < clips.size(); ++ci) {
    const auto& clip = clips[ci];
    bool is_test = test_clips.count(ci) > 0;
    bool is_valid = valid_clips.count(ci) > 0;

    std::vector<const ProcessingCondition*> chosen;
    if (cfg.exhaustive) {
      chosen = seen;
      if (is_test) chosen.insert(chosen.end(), unseen.begin(), unseen.end());
    } else {
      Rng pick(derive_seed(cfg.master_seed, "corpus/conditions/" + clip.clip_id));
      std::vector<const ProcessingCondition*> pool = seen;
      if (is_test && !unseen.empty())
        pool.insert(pool.end(), unseen.begin(), unseen.end());
      for (int k = 0; k < cfg.conditions_per_clip; ++k)
        chosen.push_back(pool[pick.below(pool.size())]);
    }

    for (const auto* cond : chosen) {
      Rng aud_pick(derive_seed(cfg.master_seed, "corpus/audiograms/" +
                                                    clip.clip_id + "/" +
                                                    cond->id));
      // Without replacement, so one (clip, condition) never repeats a pattern.
      auto aud_pool = is_test ? test_auds : train_auds;
      require(cfg.audiograms_per_clip <= int(aud_pool.size()),
              "corpus: audiograms_per_clip exceeds the available patterns");
      aud_pick.shuffle(aud_pool);
      for (int a = 0; a < cfg.audiograms_per_clip; ++a) {
        Job job;
        job.clip_index = ci;
        job.cond = cond;
        job.aud = aud_pool[std::size_t(a)];
        job.row_id = clip.clip_id + "__" + cond->id + "__" + job.aud->id;
        require(ids.insert(job.row_id).second,
                "corpus: id collision " + job.row_id);
        job.rel_path = "audio/" + job.row_id + ".wav";
        job.wav_path = (fs::path(out_dir) / job.rel_path).string();
        job.split = cond->unseen ? "test-unseen"
                    : is_test    ? "test-seen"
                    : is_valid   ? "valid"
                                 : "train";
        jobs.push_back(std::move(job));
      }
    }
  }
  require(!jobs.empty(), "corpus: produced no rows");

  // Shared read-only inputs for the workers.
  std::vector<Waveform> anchored(clips.size());
  for (std::size_t ci = 0; ci < clips.size(); ++ci)
    anchored[ci] = adjust_spl(read_wav(clips[ci].path), cfg.reference_spl_db);

  // Phase 2: process and write audio, possibly in parallel.
  auto process_job = [&](const Job& job) {
    Waveform degraded =
        apply_condition(anchored[job.clip_index], *job.cond,
                        derive_seed(cfg.master_seed, "corpus/" + job.row_id));
    Waveform amplified =
        apply_prescription(degraded, nal_r_gains(job.aud->audiogram));
    // 16-bit output: scale down (never up) if amplification pushed the peak
    // past full scale.
    double peak = 0.0;
    for (double v : amplified.samples) peak = std::max(peak, std::abs(v));
    if (peak > 0.99)
      for (auto& v : amplified.samples) v *= 0.99 / peak;
    write_wav(job.wav_path, amplified);
  };
  if (jobs_count <= 1) {
    for (const auto& job : jobs) process_job(job);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> workers;
    std::mutex error_mutex;
    std::string first_error;
    for (int t = 0; t < jobs_count; ++t)
      workers.emplace_back([&]() {
        for (;;) {
          std::size_t i = next.fetch_add(1);
          if (i >= jobs.size()) return;
          try {
            process_job(jobs[i]);
          } catch (const std::exception& e) {
            std::lock_guard<std::mutex> lock(error_mutex);
            if (first_error.empty()) first_error = e.what();
          }
        }
      });
    for (auto& w : workers) w.join();
    require(first_error.empty(), "corpus: worker failed: " + first_error);
  }

  // Phase 3: the manifest, in job order.
  CorpusResult result;
  for (const auto& job : jobs) {
    ManifestRow row;
    row.clip_id = job.row_id;
    row.audio_path = job.rel_path;
    row.genre = clips[job.clip_index].genre;
    row.condition_id = job.cond->id;
    row.audiogram_id = job.aud->id;
    row.split = job.split;
    validate(row);
    result.manifest.push_back(std::move(row));
    result.sources[job.row_id] = clips[job.clip_index].path;
  }
  return result;
}

// Scans a directory tree of WAVs; the genre is the parent directory name
// (clips directly under the root get genre "unknown").
inline std::vector<CleanClip> scan_clean_dir(const std::string& dir) {
  namespace fs = std::filesystem;
  require(fs::is_directory(dir), "corpus: not a directory: " + dir);
  std::vector<CleanClip> clips;
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    if (entry.path().extension() != ".wav") continue;
    CleanClip c;
    c.path = entry.path().string();
    c.clip_id = entry.path().stem().string();
    fs::path parent = entry.path().parent_path();
    c.genre = parent == fs::path(dir) ? "unknown" : parent.filename().string();
    clips.push_back(std::move(c));
  }
  std::sort(clips.begin(), clips.end(),
            [](const CleanClip& a, const CleanClip& b) {
              return a.clip_id < b.clip_id;
            });
  for (std::size_t i = 1; i < clips.size(); ++i)
    require(clips[i].clip_id != clips[i - 1].clip_id,
            "corpus: duplicate clip id " + clips[i].clip_id);
  require(!clips.empty(), "corpus: no .wav files under " + dir);
  return clips;
}

// ---------------------------------------------------------------------------
// Labeling
// ---------------------------------------------------------------------------

enum class LabelProvider { kCsvImport, kProxyOracle };

// csv-import copies externally computed scores (rejecting out-of-range
// values); proxy-oracle computes the built-in intrusive proxy against the
// clean sources, clamped to [0,1].
inline std::vector<ManifestRow> label_scores(
    const std::vector<ManifestRow>& manifest, LabelProvider provider,
    const std::map<std::string, std::string>& sources = {},
    const std::vector<std::pair<std::string, double>>& csv_scores = {}) {
  require(!manifest.empty(), "label: empty manifest");
  std::vector<ManifestRow> out = manifest;
  if (provider == LabelProvider::kCsvImport) {
    std::map<std::string, double> lookup;
    for (const auto& [id, s] : csv_scores) {
      require(s >= 0.0 && s <= 1.0,
              "label: score outside [0,1] for " + id + " rejected");
      lookup[id] = s;
    }
    for (auto& row : out) {
      auto it = lookup.find(row.clip_id);
      require(it != lookup.end(), "label: missing score for " + row.clip_id);
      row.true_score = it->second;
    }
  } else {
    for (auto& row : out) {
      auto it = sources.find(row.clip_id);
      require(it != sources.end(),
              "label: no clean source recorded for " + row.clip_id);
      Waveform processed = read_wav(row.audio_path);
      Waveform clean = read_wav(it->second);
      require(processed.samples.size() == clean.samples.size(),
              "label: degraded/clean length mismatch for " + row.clip_id);
      row.true_score = clamp(proxy_score(processed, clean), 0.0, 1.0);
    }
  }
  return out;
}

}  // namespace haaqi
