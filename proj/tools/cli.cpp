// Copyright 2026 The tokstd Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "cli.hpp"

#include <filesystem>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "tokstd/checkpoint.hpp"
#include "tokstd/config.hpp"
#include "tokstd/parallel.hpp"
#include "tokstd/pipeline.hpp"
#include "tokstd/synth.hpp"
#include "tokstd/train.hpp"

namespace tokstd::cli {
namespace {

namespace fs = std::filesystem;

struct Common {
  std::string config_path;
  std::vector<std::string> overrides;
  int64_t seed = -1;
  int threads = 1;
  bool json = false;
  std::string out;
};

void AddCommon(CLI::App* app, Common& c, bool with_seed) {
  app->add_option("--config", c.config_path, "TOML config file");
  app->add_option("--set", c.overrides, "config override key=value (repeatable)");
  if (with_seed) app->add_option("--seed", c.seed, "random seed; overrides the seed key")->check(CLI::NonNegativeNumber);
  app->add_option("--threads", c.threads, "worker threads")->check(CLI::PositiveNumber);
  app->add_flag("--json", c.json, "machine-readable output");
}

// Applies defaults < config file < --set < --seed and logs the result.
void Resolve(ConfigBinder& binder, const Common& c, uint64_t* seed_field, std::ostream& err) {
  if (!c.config_path.empty()) binder.apply(LoadToml(c.config_path), "file " + c.config_path);
  for (const std::string& o : c.overrides) {
    auto [k, v] = ParseOverride(o);
    binder.apply(k, v, "override");
  }
  if (c.seed >= 0) {
    if (!seed_field) Fail(ErrorKind::kConfig, "--seed is not used by this subcommand");
    binder.apply("seed", ConfigScalar(static_cast<int64_t>(c.seed)), "--seed");
  }
  err << "resolved configuration:\n" << binder.describe();
}

void BindFeatures(ConfigBinder& b, FeatureConfig& f) {
  b.bind("features.sample_rate", &f.sample_rate);
  b.bind("features.win_ms", &f.win_ms);
  b.bind("features.hop_ms", &f.hop_ms);
  b.bind("features.n_mels", &f.n_mels);
  b.bind("features.fmin", &f.fmin);
  b.bind("features.fmax", &f.fmax);
  b.bind("features.log_floor", &f.log_floor);
  b.bind("features.n_fft", &f.n_fft);
}

void BindEncoder(ConfigBinder& b, EncoderConfig& e) {
  b.bind("model.d_model", &e.d_model);
  b.bind("model.d_state", &e.d_state);
  b.bind("model.expand", &e.expand);
  b.bind("model.d_embed", &e.d_embed);
  b.bind("model.layers", &e.layers);
  b.bind("model.conv_kernel", &e.conv_kernel);
}

void BindTrain(ConfigBinder& b, TrainConfig& t) {
  b.bind("tau", &t.tau);
  b.bind("lambda", &t.lambda);
  b.bind("negatives", &t.negatives);
  b.bind("batch_size", &t.batch_size);
  b.bind("epochs", &t.epochs);
  b.bind("lr", &t.lr);
  b.bind("seed", &t.seed);
  b.bind("segment_len", &t.segment_len);
  b.bind("codebook_size", &t.codebook_size);
  b.bind("codebook_decay", &t.codebook_decay);
  b.bind("reseed_dead_codes", &t.reseed_dead_codes);
  b.bind("pairs_per_term", &t.pairs_per_term);
  b.bind("adam_beta1", &t.adam_beta1);
  b.bind("adam_beta2", &t.adam_beta2);
  b.bind("adam_eps", &t.adam_eps);
  b.bind("keep_context", &t.keep_context);
  b.bind("checkpoint_every", &t.checkpoint_every);
}

void BindSynth(ConfigBinder& b, SynthConfig& s) {
  b.bind("vocab_size", &s.vocab_size);
  b.bind("phonemes_per_term_min", &s.phonemes_per_term_min);
  b.bind("phonemes_per_term_max", &s.phonemes_per_term_max);
  b.bind("phoneme_inventory_size", &s.phoneme_inventory_size);
  b.bind("speakers", &s.speakers);
  b.bind("utterances_per_term", &s.utterances_per_term);
  b.bind("phone_dur_frames_min", &s.phone_dur_frames_min);
  b.bind("phone_dur_frames_max", &s.phone_dur_frames_max);
  b.bind("speaker_transform_scale", &s.speaker_transform_scale);
  b.bind("speaker_warp", &s.speaker_warp);
  b.bind("noise_std", &s.noise_std);
  b.bind("sample_rate", &s.sample_rate);
  b.bind("seed", &s.seed);
  b.bind("words_per_track", &s.words_per_track);
  b.bind("filler_words_per_track", &s.filler_words_per_track);
  b.bind("gap_min_s", &s.gap_min_s);
  b.bind("gap_max_s", &s.gap_max_s);
  b.bind("edge_silence_s", &s.edge_silence_s);
  b.bind("heldout_speakers", &s.heldout_speakers);
  b.bind("n_queries", &s.n_queries);
  b.bind("query_margin_s", &s.query_margin_s);
}

void BindIndex(ConfigBinder& b, IndexConfig& i) {
  b.bind("segment_len", &i.segment_len);
  b.bind("hop", &i.hop);
}

Exec ExecFor(int threads) {
  SetThreads(threads);
  return threads > 1 ? Exec::kParallel : Exec::kSerial;
}

void RequireOption(const std::string& value, const char* name) {
  if (value.empty()) Fail(ErrorKind::kValidation, std::string(name) + " is required");
}

void EnsureDir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) Fail(ErrorKind::kIo, "cannot create " + dir + ": " + ec.message());
}

void EnsureParent(const std::string& file) {
  fs::path parent = fs::path(file).parent_path();
  if (!parent.empty()) EnsureDir(parent.string());
}

void WriteText(const std::string& path, const std::string& text) {
  WriteFileBytes(path, std::vector<uint8_t>(text.begin(), text.end()));
}

void LoadModel(const std::string& path, EncoderModel& model, Codebook& codebook, const FeatureConfig& fcfg) {
  LoadCheckpoint(path, &model, &codebook);
  if (model.config.input_dim != fcfg.n_mels) {
    Fail(ErrorKind::kShape, "model expects " + std::to_string(model.config.input_dim) + " features but features.n_mels is " +
                                std::to_string(fcfg.n_mels));
  }
}

int RunSynth(const Common& c, std::ostream& out, std::ostream& err) {
  RequireOption(c.out, "--out");
  SynthConfig cfg;
  ConfigBinder b;
  BindSynth(b, cfg);
  Resolve(b, c, &cfg.seed, err);
  SynthCorpus corpus = SynthesizeCorpus(cfg);
  WriteSynthCorpus(corpus, c.out);
  size_t occ = 0;
  for (const auto& t : corpus.archive) occ += t.record.occurrences.size();
  if (c.json) {
    out << "{\"tracks\":" << corpus.archive.size() << ",\"occurrences\":" << occ
        << ",\"queries\":" << corpus.queries.size() << "}\n";
  } else {
    out << "wrote " << corpus.archive.size() << " tracks (" << occ << " occurrences) and " << corpus.queries.size()
        << " queries to " << c.out << "\n";
  }
  return 0;
}

int RunTrain(const Common& c, const std::string& manifest, const std::string& preset, std::ostream& out,
             std::ostream& err) {
  RequireOption(manifest, "--manifest");
  RequireOption(c.out, "--out");
  TrainConfig tcfg;
  EncoderConfig ecfg;
  if (preset == "test") {
    ecfg = EncoderConfig::TestPreset();
    tcfg = TrainConfig::TestPreset();
  } else if (preset != "full") {
    Fail(ErrorKind::kValidation, "unknown preset '" + preset + "' (expected full or test)");
  }
  FeatureConfig fcfg;
  ConfigBinder b;
  BindTrain(b, tcfg);
  BindEncoder(b, ecfg);
  BindFeatures(b, fcfg);
  Resolve(b, c, &tcfg.seed, err);
  ecfg.input_dim = fcfg.n_mels;
  fcfg.validate();
  ecfg.validate();
  tcfg.validate();

  Exec exec = ExecFor(c.threads);
  std::vector<TrackRecord> records = LoadManifest(manifest);
  std::vector<FeatureSequence> feats = FeaturizeAll(LoadTrackAudio(records, manifest), fcfg, exec);

  EnsureDir(c.out);
  const std::string ckpt = (fs::path(c.out) / "model.ckpt").string();
  tcfg.checkpoint_path = ckpt;
  FitOptions opts;
  opts.exec = exec;
  opts.on_step = [&](const TrainLogRow& r) {
    err << "epoch " << r.epoch << " step " << r.step << " contrast " << r.loss_contrast << " commit "
        << r.loss_commit << " total " << r.loss_total << "\n";
  };
  TrainResult result = Fit(records, feats, tcfg, ecfg, fcfg, opts);
  SaveCheckpoint(ckpt, result.model, result.codebook);
  WriteText((fs::path(c.out) / "train_log.csv").string(), FormatTrainLogCsv(result.log));
  double final_loss = result.log.empty() ? 0.0 : result.log.back().loss_total;
  if (c.json) {
    out << "{\"checkpoint\":\"" << ckpt << "\",\"steps\":" << result.log.size() << ",\"final_loss\":" << final_loss
        << "}\n";
  } else {
    out << "trained " << result.log.size() << " steps; final loss " << final_loss << "; checkpoint " << ckpt << "\n";
  }
  return 0;
}

int RunIndex(const Common& c, const std::string& manifest, const std::string& model_path, std::ostream& out,
             std::ostream& err) {
  RequireOption(manifest, "--manifest");
  RequireOption(model_path, "--model");
  RequireOption(c.out, "--out");
  IndexConfig icfg;
  FeatureConfig fcfg;
  ConfigBinder b;
  BindIndex(b, icfg);
  BindFeatures(b, fcfg);
  Resolve(b, c, nullptr, err);
  EncoderModel model;
  Codebook codebook;
  LoadModel(model_path, model, codebook, fcfg);
  icfg.codebook_size = static_cast<int>(codebook.centroids.rows());

  std::vector<TrackRecord> records = LoadManifest(manifest);
  AudioLoader loader = [&](const TrackRecord& r) { return ReadWav(ResolveTrackPath(manifest, r.path)); };
  IndexBuildReport report = BuildIndex(records, loader, model, codebook, icfg, fcfg, ExecFor(c.threads));
  for (const std::string& s : report.skipped) err << "skipped track " << s << "\n";
  EnsureParent(c.out);
  SaveIndex(report.index, c.out);
  if (c.json) {
    out << "{\"tracks\":" << report.index.track_ids.size() << ",\"segments\":" << report.index.segments.size()
        << ",\"bigrams\":" << report.index.postings.size() << ",\"skipped\":" << report.skipped.size() << "}\n";
  } else {
    out << "indexed " << report.index.track_ids.size() << " tracks, " << report.index.segments.size()
        << " segments, " << report.index.postings.size() << " distinct bigrams into " << c.out << "\n";
  }
  if (!report.skipped.empty()) {
    err << "error: " << report.skipped.size() << " of " << records.size() << " tracks could not be indexed\n";
    return 2;
  }
  return 0;
}

int RunSearch(const Common& c, const std::string& index_path, const std::string& model_path,
              const std::string& query_path, size_t top_k, bool all_segments, std::ostream& out, std::ostream& err) {
  RequireOption(index_path, "--index");
  RequireOption(model_path, "--model");
  RequireOption(query_path, "--query");
  FeatureConfig fcfg;
  ConfigBinder b;
  BindFeatures(b, fcfg);
  Resolve(b, c, nullptr, err);
  InvertedIndex idx = LoadIndex(index_path);
  EncoderModel model;
  Codebook codebook;
  LoadModel(model_path, model, codebook, fcfg);
  Audio query = ReadWav(query_path);
  SearchOptions opts;
  opts.top_k = top_k;
  opts.per_track = !all_segments;
  opts.exec = ExecFor(c.threads);
  std::vector<ScoredCandidate> results = Search(idx, model, codebook, query.samples, fcfg, opts);
  if (c.json) {
    out << ResultsToJson(idx, results) << "\n";
  } else {
    out << std::left << std::setw(6) << "rank" << std::setw(24) << "track" << std::setw(9) << "segment"
        << std::setw(10) << "score" << "offset\n";
    for (size_t r = 0; r < results.size(); ++r) {
      const ScoredCandidate& s = results[r];
      out << std::left << std::setw(6) << r + 1 << std::setw(24) << idx.track_ids[s.track] << std::setw(9)
          << s.segment << std::setw(10) << std::fixed << std::setprecision(4) << s.score << s.offset << "\n";
    }
  }
  return 0;
}

int RunEval(const Common& c, const std::string& index_path, const std::string& model_path, const std::string& manifest,
            const std::string& queries_path, std::ostream& out, std::ostream& err) {
  RequireOption(index_path, "--index");
  RequireOption(model_path, "--model");
  RequireOption(manifest, "--manifest");
  RequireOption(queries_path, "--queries");
  FeatureConfig fcfg;
  MetricsConfig mcfg;
  size_t top_k = 0;
  ConfigBinder b;
  BindFeatures(b, fcfg);
  b.bind("beta", &mcfg.beta);
  b.bind("overlap_ratio", &mcfg.overlap_ratio);
  b.bind("top_k", &top_k);
  Resolve(b, c, nullptr, err);
  mcfg.validate();

  InvertedIndex idx = LoadIndex(index_path);
  EncoderModel model;
  Codebook codebook;
  LoadModel(model_path, model, codebook, fcfg);
  std::vector<TrackRecord> archive = LoadManifest(manifest);
  std::vector<TrackRecord> queries = LoadManifest(queries_path);
  SearchOptions opts;
  opts.top_k = top_k;
  opts.per_track = false;
  opts.exec = ExecFor(c.threads);
  MetricsReport report =
      EvaluateRetrieval(idx, model, codebook, archive, queries, LoadTrackAudio(queries, queries_path), fcfg, opts, mcfg);
  for (const std::string& w : report.warnings) err << "warning: " << w << "\n";
  if (!c.out.empty()) {
    EnsureDir(c.out);
    WriteText((fs::path(c.out) / "metrics.json").string(), ReportToJson(report) + "\n");
    WriteText((fs::path(c.out) / "per_query.csv").string(), ReportToCsv(report));
  }
  if (c.json) {
    out << ReportToJson(report) << "\n";
  } else {
    out << std::fixed << std::setprecision(4) << "queries " << report.n_queries << "  MAP " << report.map << "  MRR "
        << report.mrr << "  MTWV " << report.mtwv << " (beta " << report.beta << ")\n";
  }
  return 0;
}

}  // namespace

int Run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Query-by-example spoken term detection with discrete speech tokens"};
  app.require_subcommand(1);
  Common c;
  std::string manifest, model, index, query, queries, preset = "full";
  size_t top_k = 10;
  bool all_segments = false;

  CLI::App* synth = app.add_subcommand("synth", "generate a synthetic corpus");
  AddCommon(synth, c, true);
  synth->add_option("--out", c.out, "output directory");

  CLI::App* train = app.add_subcommand("train", "train the encoder and codebook");
  AddCommon(train, c, true);
  train->add_option("--manifest", manifest, "archive manifest (JSON lines)");
  train->add_option("--out", c.out, "output directory for model.ckpt and train_log.csv");
  train->add_option("--preset", preset, "full or test");

  CLI::App* idx = app.add_subcommand("index", "tokenize an archive into an inverted index");
  AddCommon(idx, c, false);
  idx->add_option("--manifest", manifest, "archive manifest");
  idx->add_option("--model", model, "checkpoint");
  idx->add_option("--out", c.out, "index file to write");

  CLI::App* search = app.add_subcommand("search", "search an index with a spoken query");
  AddCommon(search, c, false);
  search->add_option("--index", index, "index file");
  search->add_option("--model", model, "checkpoint");
  search->add_option("--query", query, "query WAV");
  search->add_option("--topk", top_k, "results to return (0 = all)");
  search->add_flag("--all-segments", all_segments, "rank segments instead of tracks");

  CLI::App* eval = app.add_subcommand("eval", "score queries against manifest relevance");
  AddCommon(eval, c, false);
  eval->add_option("--index", index, "index file");
  eval->add_option("--model", model, "checkpoint");
  eval->add_option("--manifest", manifest, "archive manifest");
  eval->add_option("--queries", queries, "query manifest");
  eval->add_option("--out", c.out, "directory for metrics.json and per_query.csv");

  std::vector<std::string> argv(args.rbegin(), args.rend());
  try {
    app.parse(argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }

  try {
    if (synth->parsed()) return RunSynth(c, out, err);
    if (train->parsed()) return RunTrain(c, manifest, preset, out, err);
    if (idx->parsed()) return RunIndex(c, manifest, model, out, err);
    if (search->parsed()) return RunSearch(c, index, model, query, top_k, all_segments, out, err);
    if (eval->parsed()) return RunEval(c, index, model, manifest, queries, out, err);
  } catch (const Error& e) {
    err << "error (" << ErrorKindName(e.kind()) << "): " << e.what() << "\n";
    return e.is_validation() ? 1 : 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}

}  // namespace tokstd::cli
