// Copyright (c) 2026 The yvec Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "yvec/aggregator/embedding.hpp"
#include "yvec/analysis/cfr.hpp"
#include "yvec/audio/manifest.hpp"
#include "yvec/audio/synth.hpp"
#include "yvec/audio/trials.hpp"
#include "yvec/cli/run_config.hpp"
#include "yvec/evaluator/metrics.hpp"
#include "yvec/trainer/checkpoint.hpp"
#include "yvec/trainer/dataset.hpp"
#include "yvec/trainer/trainer.hpp"

namespace yvec::cli {

namespace fs = std::filesystem;

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

namespace detail {

inline void require_file(const std::string& path, const char* what) {
  if (path.empty()) throw UsageError(std::string("missing ") + what + " path");
  if (!fs::is_regular_file(path)) throw FormatError(std::string(what) + " not found: " + path);
}

inline void make_out_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw FormatError("cannot create output directory " + dir.string());
  }
}

inline void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out || !(out << text)) throw FormatError("cannot write " + path.string());
}

template <typename Fn>
void write_stream(const fs::path& path, Fn&& fn) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string());
  fn(out);
  if (!out) throw FormatError("write failed for " + path.string());
}

/// Adds `files` (relative names) to the run directory's `files.json`.
inline void record_outputs(const fs::path& dir, const std::vector<std::string>& files) {
  std::set<std::string> all(files.begin(), files.end());
  const fs::path index = dir / "files.json";
  if (fs::exists(index)) {
    std::ifstream in(index);
    nlohmann::json old;
    try {
      in >> old;
      for (const auto& f : old) all.insert(f.get<std::string>());
    } catch (const nlohmann::json::exception&) {
      // rewritten below
    }
  }
  write_text(index, nlohmann::json(all).dump(2) + "\n");
}

inline std::string epoch_tag(std::size_t epoch) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "checkpoint-e%04zu.yvec", epoch);
  return buf;
}

inline std::vector<std::string> preset_list(const std::string& csv) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream is(csv);
  while (std::getline(is, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

inline nlohmann::json stats_json(const std::vector<analysis::CfrResult>& curves, double lo,
                                 double hi) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& c : curves) {
    const auto s = analysis::flatness_stats(c, lo, hi);
    j[c.source] = {{"peak_minus_mean_db", s.peak_minus_mean_db},
                   {"stddev_db", s.stddev_db},
                   {"argmax_hz", s.argmax_hz},
                   {"filters_used", c.filters_used},
                   {"filters_skipped", c.filters_skipped}};
  }
  return j;
}

}  // namespace detail

// ---- synth -----------------------------------------------------------------

struct SynthArgs {
  std::size_t speakers = 20;
  std::size_t utts = 20;
  double seconds = 5.0;
  std::uint64_t seed = 7;
  std::size_t trials = 500;
  std::string out;
};

inline int cmd_synth(const SynthArgs& a, std::ostream& log) {
  if (a.speakers < 2) throw UsageError("--speakers must be at least 2 to form nontarget trials");
  if (a.utts < 2) throw UsageError("--utts must be at least 2 to form target trials");
  if (!(a.seconds > 0)) throw UsageError("--seconds must be positive");
  if (a.trials < 2) throw UsageError("--trials must be at least 2");
  if (a.out.empty()) throw UsageError("--out is required");
  detail::make_out_dir(a.out);
  const auto manifest = audio::synth_corpus_generate(a.speakers, a.utts, a.seconds, a.seed, a.out);
  const auto trials = audio::generate_trials(manifest.records(), a.trials, a.seed);
  detail::write_stream(fs::path(a.out) / "trials.txt",
                       [&](std::ostream& os) { audio::write_trial_list(os, trials); });
  log << "wrote " << manifest.size() << " utterances and " << trials.size() << " trials to "
      << a.out << '\n';
  return kExitOk;
}

// ---- train -----------------------------------------------------------------

struct TrainArgs {
  RunConfig config;
  std::string resume;
  std::size_t max_steps = 0;  // 0 = no limit
};

inline int cmd_train(const TrainArgs& a, std::ostream& log) {
  const RunConfig& rc = a.config;
  detail::require_file(rc.paths.manifest, "manifest");
  if (!a.resume.empty()) detail::require_file(a.resume, "checkpoint");
  const fs::path out = rc.paths.out_dir;
  detail::make_out_dir(out);

  const auto manifest = audio::load_manifest(rc.paths.manifest);
  std::unique_ptr<trainer::Model<float>> model;
  trainer::TrainConfig train = rc.train;
  trainer::Checkpoint ck;
  if (!a.resume.empty()) {
    ck = trainer::load_checkpoint(a.resume);
    if (ck.model.n_classes != manifest.num_speakers()) {
      throw ConfigError("checkpoint has " + std::to_string(ck.model.n_classes) +
                        " classes, manifest has " + std::to_string(manifest.num_speakers()));
    }
    model = trainer::model_from_checkpoint(ck);
    const std::size_t epochs = train.epochs;
    train = ck.train;
    train.epochs = std::max(epochs, ck.state.epoch);
  } else {
    model = std::make_unique<trainer::Model<float>>(resolve_model(rc, manifest.num_speakers()),
                                                    rc.seed);
  }
  const auto data = trainer::load_training_set(manifest, {}, train.threads);
  trainer::Trainer tr(*model, data, train);
  if (!a.resume.empty()) trainer::resume(tr, *model, ck);

  nlohmann::json snapshot = to_json(rc);
  snapshot["model"] = model->config();
  snapshot["train"] = train;
  detail::write_text(out / "config.json", snapshot.dump(2) + "\n");

  const fs::path log_path = out / "train.log.jsonl";
  std::ofstream jlog(log_path, a.resume.empty() ? std::ios::trunc : std::ios::app);
  if (!jlog) throw FormatError("cannot write " + log_path.string());
  tr.set_log(&jlog);

  std::vector<std::string> produced = {"config.json", "train.log.jsonl", "checkpoint.yvec"};
  auto save = [&](const std::string& name) {
    trainer::save_checkpoint(out / name, trainer::make_checkpoint(*model, tr));
  };
  while (!tr.finished()) {
    trainer::EpochMetrics m;
    m.epoch = tr.state().epoch;
    double loss = 0, hits = 0;
    do {
      const auto rec = tr.step();
      loss += rec.loss * static_cast<double>(rec.size);
      hits += rec.acc * static_cast<double>(rec.size);
      m.samples += rec.size;
      ++m.batches;
    } while (tr.state().batch != 0 && (a.max_steps == 0 || tr.state().step < a.max_steps));
    m.mean_loss = loss / static_cast<double>(m.samples);
    m.accuracy = hits / static_cast<double>(m.samples);
    const bool complete = tr.state().batch == 0;
    jlog << nlohmann::json{{"event", complete ? "epoch" : "partial_epoch"},
                           {"epoch", m.epoch},
                           {"step", tr.state().step},
                           {"lr", trainer::lr_at_epoch(train, m.epoch)},
                           {"loss", m.mean_loss},
                           {"acc", m.accuracy}}
                .dump()
         << '\n';
    log << "epoch " << m.epoch << " loss " << m.mean_loss << " acc " << m.accuracy << '\n';
    if (complete && (m.epoch + 1) % rc.save_every_epochs == 0) {
      save(detail::epoch_tag(m.epoch + 1));
      produced.push_back(detail::epoch_tag(m.epoch + 1));
    }
    if (a.max_steps != 0 && tr.state().step >= a.max_steps) break;
  }
  save("checkpoint.yvec");
  detail::record_outputs(out, produced);
  log << "checkpoint " << (out / "checkpoint.yvec").string() << '\n';
  return kExitOk;
}

// ---- embed -----------------------------------------------------------------

struct EmbedArgs {
  std::string checkpoint;
  std::string manifest;
  std::string out;
  std::size_t samples = audio::kDefaultCropSamples;
  std::size_t threads = 0;
};

inline int cmd_embed(const EmbedArgs& a, std::ostream& log) {
  if (a.out.empty()) throw UsageError("--out is required");
  if (a.samples == 0) throw UsageError("--samples must be positive");
  detail::require_file(a.checkpoint, "checkpoint");
  detail::require_file(a.manifest, "manifest");
  const auto ck = trainer::load_checkpoint(a.checkpoint);
  const auto model = trainer::model_from_checkpoint(ck);
  const auto manifest = audio::load_manifest(a.manifest);
  detail::make_out_dir(a.out);

  const auto& records = manifest.records();
  std::vector<aggregator::SpeakerEmbedding> embs(records.size());
  parallel_for(records.size(), effective_threads(a.threads), [&](std::size_t i) {
    const auto u = audio::normalize_by_max(manifest.load(records[i]));
    const auto x = audio::center_crop(u.samples, a.samples);
    embs[i] = {records[i].utterance_id, model->embed(x)};
  });
  const fs::path out = a.out;
  aggregator::save_embeddings(out / "embeddings.bin", embs);
  aggregator::save_embeddings(out / "embeddings.csv", embs);
  detail::record_outputs(out, {"embeddings.bin", "embeddings.csv"});
  log << "embedded " << embs.size() << " utterances (dim "
      << (embs.empty() ? 0 : embs.front().vector.size()) << ")\n";
  return kExitOk;
}

// ---- eval ------------------------------------------------------------------

struct EvalArgs {
  std::string embeddings;
  std::string trials;
  std::string out;
  std::size_t resamples = 1000;
  double confidence = 0.95;
  std::uint64_t seed = 1;
  evaluator::DcfConfig dcf;
};

inline int cmd_eval(const EvalArgs& a, std::ostream& log) {
  if (a.out.empty()) throw UsageError("--out is required");
  detail::require_file(a.embeddings, "embeddings");
  detail::require_file(a.trials, "trial list");
  std::map<std::string, aggregator::SpeakerEmbedding> table;
  for (auto& e : aggregator::load_embeddings(a.embeddings)) {
    auto id = e.utterance_id;
    table.emplace(std::move(id), std::move(e));
  }
  const auto trials = audio::parse_trial_list(fs::path(a.trials));
  const auto scores = evaluator::score_trials(trials, table);
  const auto report = evaluator::evaluate(scores, a.dcf, a.resamples, a.confidence, a.seed);
  const fs::path out = a.out;
  detail::make_out_dir(out);
  nlohmann::json j = evaluator::to_json(report);
  j["dcf"] = {{"c_miss", a.dcf.c_miss}, {"c_fa", a.dcf.c_fa}, {"p_target", a.dcf.p_target}};
  j["bootstrap"] = {{"resamples", a.resamples}, {"confidence", a.confidence}, {"seed", a.seed}};
  detail::write_text(out / "report.json", j.dump(2) + "\n");
  detail::write_stream(out / "scores.csv",
                       [&](std::ostream& os) { evaluator::write_score_csv(os, scores); });
  detail::write_stream(out / "roc.csv", [&](std::ostream& os) {
    evaluator::write_roc_csv(os, evaluator::roc_points(scores));
  });
  detail::record_outputs(out, {"report.json", "scores.csv", "roc.csv"});
  log << "EER " << report.eer * 100 << "% [" << report.ci_low * 100 << ", "
      << report.ci_high * 100 << "]  minDCF " << report.min_dcf << '\n';
  return kExitOk;
}

// ---- cfr -------------------------------------------------------------------

struct CfrArgs {
  std::string checkpoint;
  std::string out;
  std::string preset;  // expected encoder preset, checked when given
  double band_lo = 0;
  double band_hi = 8000;
};

inline int cmd_cfr(const CfrArgs& a, std::ostream& log) {
  if (a.out.empty()) throw UsageError("--out is required");
  detail::require_file(a.checkpoint, "checkpoint");
  const auto ck = trainer::load_checkpoint(a.checkpoint);
  if (!a.preset.empty() && ck.model.encoder.name != a.preset) {
    throw ConfigError("checkpoint holds preset '" + ck.model.encoder.name + "', expected '" +
                      a.preset + "'");
  }
  const auto model = trainer::model_from_checkpoint(ck);
  const auto curves = analysis::encoder_cfr(model->params());
  const auto stats = detail::stats_json(curves, a.band_lo, a.band_hi);
  const fs::path out = a.out;
  detail::make_out_dir(out);
  detail::write_stream(out / "cfr.csv",
                       [&](std::ostream& os) { analysis::write_cfr_csv(os, curves); });
  detail::write_text(out / "cfr_stats.json", stats.dump(2) + "\n");
  detail::record_outputs(out, {"cfr.csv", "cfr_stats.json"});
  for (const auto& c : curves) {
    log << c.source << ": stddev " << stats[c.source]["stddev_db"].get<double>()
        << " dB, peak at " << stats[c.source]["argmax_hz"].get<double>() << " Hz\n";
  }
  return kExitOk;
}

// ---- ablate ----------------------------------------------------------------

struct AblateArgs {
  std::string manifest;
  std::string out;
  std::string presets;  // comma separated; empty = all
  double width = 0.25;
  std::size_t steps = 10;
  std::size_t batch_size = 8;
  double crop_seconds = 1.0;
  double lr = 1e-4;
  std::uint64_t seed = 1;
  std::size_t threads = 0;
};

/// Flatness statistics of the pooled CFR for one preset after a short run.
struct AblationRow {
  std::string preset;
  std::size_t branches = 0;
  std::size_t steps = 0;
  double final_loss = 0;
  analysis::FlatnessStats pooled;
};

inline std::vector<AblationRow> run_ablation(const AblateArgs& a, std::ostream& log) {
  if (a.out.empty()) throw UsageError("--out is required");
  if (!(a.width > 0)) throw UsageError("--width must be positive");
  auto presets = detail::preset_list(a.presets);
  if (presets.empty()) presets = encoder::presets::names();
  for (const auto& p : presets) {
    const auto& all = encoder::presets::names();
    if (std::find(all.begin(), all.end(), p) == all.end()) {
      throw UsageError("unknown preset '" + p + "'");
    }
  }
  detail::require_file(a.manifest, "manifest");
  const auto manifest = audio::load_manifest(a.manifest);
  const auto data = trainer::load_training_set(manifest, {}, a.threads);
  const fs::path out = a.out;
  detail::make_out_dir(out);

  std::vector<AblationRow> rows;
  std::vector<analysis::CfrResult> curves;
  nlohmann::json report = nlohmann::json::object();
  for (const auto& p : presets) {
    trainer::Model<float> model(trainer::make_model_config(p, data.n_classes, a.width), a.seed);
    trainer::TrainConfig cfg;
    cfg.lr0 = a.lr;
    cfg.batch_size = a.batch_size;
    cfg.crop_seconds = a.crop_seconds;
    cfg.utterances_per_epoch = a.batch_size * std::max<std::size_t>(a.steps, 1);
    cfg.epochs = 1;
    cfg.seed = a.seed;
    cfg.threads = a.threads;
    trainer::Trainer tr(model, data, cfg);
    AblationRow row;
    row.preset = p;
    row.branches = model.config().encoder.branches.size();
    for (std::size_t s = 0; s < a.steps; ++s) row.final_loss = tr.step().loss;
    row.steps = tr.state().step;
    auto c = analysis::encoder_cfr(model.params(), p + "/");
    row.pooled = analysis::flatness_stats(c.back());
    report[p] = {{"branches", row.branches},
                 {"steps", row.steps},
                 {"final_loss", row.final_loss},
                 {"cfr", detail::stats_json(c, 0, 8000)},
                 {"pooled_fluctuation_below_5db", row.pooled.peak_minus_mean_db < 5.0}};
    log << p << ": pooled CFR stddev " << row.pooled.stddev_db << " dB, peak-mean "
        << row.pooled.peak_minus_mean_db << " dB at " << row.pooled.argmax_hz << " Hz\n";
    curves.insert(curves.end(), c.begin(), c.end());
    rows.push_back(row);
  }
  detail::write_text(out / "ablation.json", report.dump(2) + "\n");
  detail::write_stream(out / "ablation_cfr.csv",
                       [&](std::ostream& os) { analysis::write_cfr_csv(os, curves); });
  detail::record_outputs(out, {"ablation.json", "ablation_cfr.csv"});
  return rows;
}

// ---- entry point -----------------------------------------------------------

/// Parses `args` (without the program name) and runs one subcommand.
/// Returns 0 on success, 1 on runtime or data failure, 2 on usage errors.
inline int run(const std::vector<std::string>& args, std::ostream& out = std::cout,
               std::ostream& err = std::cerr) {
  CLI::App app{"Y-vector speaker embedding toolkit"};
  app.require_subcommand(1);

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "Generate a synthetic corpus and trial list");
  s->add_option("--speakers", synth.speakers)->capture_default_str();
  s->add_option("--utts", synth.utts, "Utterances per speaker")->capture_default_str();
  s->add_option("--seconds", synth.seconds)->capture_default_str();
  s->add_option("--seed", synth.seed)->capture_default_str();
  s->add_option("--trials", synth.trials)->capture_default_str();
  s->add_option("--out", synth.out)->required();

  TrainArgs train;
  std::string config_path, preset, manifest, out_dir;
  double width = 0, lr = -1, crop = 0;
  std::uint64_t seed = 0;
  std::size_t epochs = 0, batch = 0, upe = 0, threads = 0, save_every = 0;
  auto* t = app.add_subcommand("train", "Train a model");
  auto* o_config = t->add_option("--config", config_path, "JSON run config");
  auto* o_manifest = t->add_option("--manifest", manifest);
  auto* o_out = t->add_option("--out", out_dir, "Run directory");
  auto* o_preset = t->add_option("--preset", preset);
  auto* o_width = t->add_option("--width", width, "Channel width multiplier");
  auto* o_seed = t->add_option("--seed", seed);
  auto* o_epochs = t->add_option("--epochs", epochs);
  auto* o_batch = t->add_option("--batch-size", batch);
  auto* o_lr = t->add_option("--lr", lr, "Initial learning rate");
  auto* o_crop = t->add_option("--crop-seconds", crop);
  auto* o_upe = t->add_option("--utterances-per-epoch", upe);
  auto* o_threads = t->add_option("--threads", threads);
  auto* o_save = t->add_option("--save-every", save_every, "Epochs between checkpoints");
  t->add_option("--resume", train.resume, "Checkpoint to continue from");
  t->add_option("--max-steps", train.max_steps, "Stop after this many optimizer steps");

  EmbedArgs embed;
  auto* e = app.add_subcommand("embed", "Extract one embedding per utterance");
  e->add_option("--checkpoint", embed.checkpoint)->required();
  e->add_option("--manifest", embed.manifest)->required();
  e->add_option("--out", embed.out)->required();
  e->add_option("--samples", embed.samples, "Window length (center crop, tiled when short)")
      ->capture_default_str();
  e->add_option("--threads", embed.threads);

  EvalArgs eval;
  auto* v = app.add_subcommand("eval", "Score trials and report EER / minDCF");
  v->add_option("--embeddings", eval.embeddings)->required();
  v->add_option("--trials", eval.trials)->required();
  v->add_option("--out", eval.out)->required();
  v->add_option("--resamples", eval.resamples)->capture_default_str();
  v->add_option("--confidence", eval.confidence)->capture_default_str();
  v->add_option("--seed", eval.seed)->capture_default_str();
  v->add_option("--c-miss", eval.dcf.c_miss)->capture_default_str();
  v->add_option("--c-fa", eval.dcf.c_fa)->capture_default_str();
  v->add_option("--p-target", eval.dcf.p_target)->capture_default_str();

  CfrArgs cfr;
  auto* c = app.add_subcommand("cfr", "Cumulative frequency response of first-layer filters");
  c->add_option("--checkpoint", cfr.checkpoint)->required();
  c->add_option("--out", cfr.out)->required();
  c->add_option("--preset", cfr.preset, "Fail unless the checkpoint holds this preset");
  c->add_option("--band-lo", cfr.band_lo)->capture_default_str();
  c->add_option("--band-hi", cfr.band_hi)->capture_default_str();

  AblateArgs ablate;
  auto* b = app.add_subcommand("ablate", "Short runs over encoder presets with CFR statistics");
  b->add_option("--manifest", ablate.manifest)->required();
  b->add_option("--out", ablate.out)->required();
  b->add_option("--presets", ablate.presets, "Comma-separated presets (default: all)");
  b->add_option("--width", ablate.width)->capture_default_str();
  b->add_option("--steps", ablate.steps)->capture_default_str();
  b->add_option("--batch-size", ablate.batch_size)->capture_default_str();
  b->add_option("--crop-seconds", ablate.crop_seconds)->capture_default_str();
  b->add_option("--lr", ablate.lr)->capture_default_str();
  b->add_option("--seed", ablate.seed)->capture_default_str();
  b->add_option("--threads", ablate.threads);

  std::vector<std::string> argv(args.rbegin(), args.rend());
  try {
    app.parse(argv);
  } catch (const CLI::ParseError& pe) {
    const int code = app.exit(pe, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*s) return cmd_synth(synth, out);
    if (*t) {
      RunConfig& rc = train.config;
      if (*o_config) rc = load_run_config(config_path);
      if (*o_manifest) rc.paths.manifest = manifest;
      if (*o_out) rc.paths.out_dir = out_dir;
      if (*o_preset) rc.preset = preset;
      if (*o_width) rc.width = width;
      if (*o_seed) rc.seed = seed;
      if (*o_epochs) rc.train.epochs = epochs;
      if (*o_batch) rc.train.batch_size = batch;
      if (*o_lr) rc.train.lr0 = lr;
      if (*o_crop) rc.train.crop_seconds = crop;
      if (*o_upe) rc.train.utterances_per_epoch = upe;
      if (*o_threads) rc.train.threads = threads;
      if (*o_save) rc.save_every_epochs = save_every;
      rc = parse_run_config(to_json(rc));
      try {
        trainer::validate(rc.train);
      } catch (const ConfigError& ce) {
        throw UsageError(ce.what());
      }
      return cmd_train(train, out);
    }
    if (*e) return cmd_embed(embed, out);
    if (*v) return cmd_eval(eval, out);
    if (*c) return cmd_cfr(cfr, out);
    if (*b) {
      run_ablation(ablate, out);
      return kExitOk;
    }
  } catch (const UsageError& ue) {
    err << "error: " << ue.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << '\n';
    return kExitFailure;
  }
  return kExitUsage;
}

inline int run(int argc, char** argv) {
  return run(std::vector<std::string>(argv + 1, argv + argc));
}

}  // namespace yvec::cli
