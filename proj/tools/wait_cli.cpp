// waitcli: operator entry points for the whole pipeline.
//
//   prepare   build a dataset root from videos / frame dirs / image dirs
//   train     run (or resume) a training run from a config file
//   stylize   translate a clip with a trained checkpoint
//   evaluate  score a checkpoint on a test split (fid / fwe / mse)
//   ablate    expand a base config into the standard sweep configs
//
// Exit codes: 0 success, 2 config error, 3 data error, 4 numerical failure.
// Every artifact-producing verb writes run_manifest.json next to its outputs;
// rerunning refuses to clobber them unless --overwrite is given.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "wait/checkpoint.hpp"
#include "wait/common.hpp"
#include "wait/config.hpp"
#include "wait/data.hpp"
#include "wait/evaluate.hpp"
#include "wait/manifest.hpp"
#include "wait/media.hpp"
#include "wait/trainer.hpp"

namespace fs = std::filesystem;
using namespace wait;

namespace {

struct Args {
  std::string config, out, device = "cpu", data;
  std::string checkpoint, frames, flows, extractor = "pixel8", real_features;
  std::uint64_t seed = 0;
  bool has_seed = false;
  bool overwrite = false, resume = false, aux_neighbor = false, identity = false;
  int stride = 1;
  int test_stride = 0;  // 0: follow --stride
  std::vector<std::string> train_source, test_source, train_target, test_target;
};

fs::path require_out(const Args& a, const char* verb) {
  if (a.out.empty()) throw ConfigError(std::string(verb) + ": --out is required");
  return fs::path(a.out);
}

void refuse_existing(const fs::path& marker, bool overwrite, const char* verb) {
  if (fs::exists(marker) && !overwrite)
    throw ConfigError(std::string(verb) + ": " + marker.string() +
                      " exists (pass --overwrite to replace it)");
}

RunManifest start_manifest(const std::string& command) {
  RunManifest m;
  m.command = command;
  m.version = tool_version();
  m.started_at = iso8601_utc_now();
  return m;
}

void finish_manifest(RunManifest& m, const fs::path& dir) {
  m.finished_at = iso8601_utc_now();
  write_run_manifest(dir / "run_manifest.json", m);
}

// Last meaningful path component; "frames/" and "frames" give the same id.
std::string path_id(const fs::path& p) {
  fs::path q = p.lexically_normal();
  std::string name = q.filename().string();
  if (name.empty() || name == ".") name = q.parent_path().filename().string();
  return name.empty() ? "clip" : name;
}

std::string frame_name(const std::string& clip_id, std::int64_t index) {
  std::ostringstream os;
  os << clip_id << "_" << std::setw(6) << std::setfill('0') << index << ".png";
  return os.str();
}

// A source argument expands to clips: a video file is one clip, a directory
// of videos is one clip per video, a directory of subdirectories is one clip
// per subdirectory, and a flat directory of images is a single clip.
std::vector<std::pair<fs::path, std::string>> resolve_clips(const fs::path& src) {
  if (fs::is_regular_file(src)) {
    if (media::is_video_file(src)) return {{src, src.stem().string()}};
    throw DataError("prepare: " + src.string() + " is not a video file");
  }
  if (!fs::is_directory(src))
    throw DataError("prepare: source does not exist: " + src.string());

  std::vector<fs::path> videos, subdirs;
  bool flat_images = false;
  std::vector<fs::path> entries;
  for (const auto& e : fs::directory_iterator(src)) entries.push_back(e.path());
  std::sort(entries.begin(), entries.end());
  for (const fs::path& p : entries) {
    if (fs::is_directory(p)) subdirs.push_back(p);
    else if (media::is_video_file(p)) videos.push_back(p);
    else if (media::is_image_file(p)) flat_images = true;
  }

  std::vector<std::pair<fs::path, std::string>> clips;
  if (!videos.empty()) {
    for (const fs::path& v : videos) clips.emplace_back(v, v.stem().string());
    return clips;
  }
  if (!subdirs.empty()) {
    if (flat_images)
      std::fprintf(stderr, "warning: %s mixes images and subdirectories; using subdirectories\n",
                   src.string().c_str());
    for (const fs::path& d : subdirs) clips.emplace_back(d, path_id(d));
    return clips;
  }
  if (flat_images) return {{src, path_id(src)}};
  throw DataError("prepare: no videos, frame directories, or images under " + src.string());
}

// Materializes one clip under split_dir with canonical frame names. Video
// frames land there directly; directory frames are re-encoded so the dataset
// root is self-contained.
data::FrameSequence ingest_clip(const fs::path& src, int stride, const fs::path& split_dir,
                                const std::string& clip_id) {
  fs::create_directories(split_dir);
  if (media::is_video_file(src)) return data::extract_frames(src, stride, split_dir, clip_id);
  data::FrameSequence seq = data::extract_frames(src, stride, split_dir, clip_id);
  for (data::FrameRef& fr : seq.frames) {
    const fs::path dst = split_dir / frame_name(clip_id, fr.timestamp);
    media::write_image(dst, media::read_image(fr.path));
    fr.path = dst;
  }
  return seq;
}

std::vector<data::FrameSequence> ingest_sources(const std::vector<std::string>& sources,
                                                int stride, const fs::path& split_dir,
                                                const char* split) {
  std::vector<data::FrameSequence> out;
  std::set<std::string> ids;
  for (const std::string& s : sources)
    for (const auto& [src, id] : resolve_clips(s)) {
      if (!ids.insert(id).second)
        throw DataError("prepare: duplicate clip id '" + id + "' in " + split);
      out.push_back(ingest_clip(src, stride, split_dir, id));
    }
  return out;
}

int ingest_targets(const std::vector<std::string>& sources, const fs::path& split_dir,
                   const char* split) {
  fs::create_directories(split_dir);
  std::set<std::string> used;
  int count = 0;
  for (const std::string& s : sources) {
    std::vector<fs::path> files;
    if (fs::is_regular_file(s) && media::is_image_file(s)) {
      files.push_back(s);
    } else if (fs::is_directory(s)) {
      for (const auto& e : fs::directory_iterator(s))
        if (e.is_regular_file() && media::is_image_file(e.path())) files.push_back(e.path());
      std::sort(files.begin(), files.end());
      if (files.empty()) throw DataError("prepare: no images under " + s);
    } else {
      throw DataError("prepare: target source does not exist: " + s);
    }
    for (const fs::path& f : files) {
      try {
        media::read_image(f);
      } catch (const DataError&) {
        std::fprintf(stderr, "warning: skipping undecodable target image %s\n",
                     f.string().c_str());
        continue;
      }
      const fs::path dst = split_dir / f.filename();
      if (!used.insert(f.filename().string()).second)
        throw DataError("prepare: duplicate target image name '" + f.filename().string() +
                        "' in " + split);
      fs::copy_file(f, dst, fs::copy_options::overwrite_existing);
      ++count;
    }
  }
  return count;
}

int total_frames(const std::vector<data::FrameSequence>& clips) {
  int n = 0;
  for (const auto& c : clips) n += c.size();
  return n;
}

void cmd_prepare(const Args& a) {
  const fs::path root = require_out(a, "prepare");
  if (a.train_source.empty() && a.test_source.empty() && a.train_target.empty() &&
      a.test_target.empty())
    throw ConfigError(
        "prepare: no inputs (pass --train-source/--test-source/--train-target/--test-target)");
  refuse_existing(root / "manifest.json", a.overwrite, "prepare");

  RunManifest m = start_manifest("prepare");
  data::DatasetRoot ds;
  ds.root = root;
  fs::create_directories(root);
  // A rebuild must not inherit stale frames: the B splits are scanned from
  // disk at load time, so leftovers would silently join the dataset.
  if (a.overwrite)
    for (const char* dir : {"trainA", "trainB", "testA", "testB"}) fs::remove_all(root / dir);
  const int test_stride = a.test_stride > 0 ? a.test_stride : a.stride;
  ds.train_source = ingest_sources(a.train_source, a.stride, root / "trainA", "trainA");
  ds.test_source = ingest_sources(a.test_source, test_stride, root / "testA", "testA");
  const int train_b = ingest_targets(a.train_target, root / "trainB", "trainB");
  const int test_b = ingest_targets(a.test_target, root / "testB", "testB");
  data::write_manifest(ds);

  std::printf("trainA: %d frames across %zu clips (stride %d)\n", total_frames(ds.train_source),
              ds.train_source.size(), a.stride);
  std::printf("trainB: %d images\n", train_b);
  std::printf("testA: %d frames across %zu clips (stride %d)\n", total_frames(ds.test_source),
              ds.test_source.size(), test_stride);
  std::printf("testB: %d images\n", test_b);

  m.dataset_digests.emplace_back(root.string(), dataset_digest(root));
  m.outputs.push_back((root / "manifest.json").string());
  finish_manifest(m, root);
}

void cmd_train(const Args& a) {
  if (a.config.empty()) throw ConfigError("train: --config is required");
  const fs::path run_dir = require_out(a, "train");
  VariantConfig cfg = load_config(a.config);
  if (a.has_seed) cfg.seed = a.seed;
  if (!a.data.empty()) cfg.dataset = a.data;
  if (cfg.dataset.empty())
    throw ConfigError("train: config has no `dataset:` path (set it or pass --data)");
  const data::DatasetRoot ds = data::load_dataset_root(cfg.dataset);

  const bool have_ckpt = fs::exists(run_dir / "checkpoints" / "latest");
  if (have_ckpt && !a.resume && !a.overwrite)
    throw ConfigError("train: " + run_dir.string() +
                      " already holds checkpoints (pass --resume to continue or --overwrite "
                      "to restart from scratch)");

  RunManifest m = start_manifest("train");
  train(cfg, ds, run_dir, a.resume && have_ckpt);
  m.config_yaml = config_to_yaml(cfg);
  m.dataset_digests.emplace_back(cfg.dataset, dataset_digest(cfg.dataset));
  for (const char* rel : {"config.yaml", "logs/losses.jsonl", "checkpoints/latest"})
    m.outputs.push_back((run_dir / rel).string());
  finish_manifest(m, run_dir);
}

void cmd_stylize(const Args& a) {
  if (a.checkpoint.empty()) throw ConfigError("stylize: --checkpoint is required");
  if (a.frames.empty()) throw ConfigError("stylize: --frames is required");
  const fs::path out_dir = require_out(a, "stylize");
  refuse_existing(out_dir / "run_manifest.json", a.overwrite, "stylize");

  const Checkpoint ckpt = read_checkpoint(a.checkpoint);
  const VariantConfig cfg = config_from_yaml(ckpt.config_text);
  const int size = cfg.generator.image_size;

  RunManifest m = start_manifest("stylize");
  m.config_yaml = ckpt.config_text;
  fs::create_directories(out_dir);
  const fs::path src(a.frames);
  // Video inputs must be materialized anyway; keep the decoded frames next
  // to the outputs so the run is self-describing.
  const data::FrameSequence seq = data::extract_frames(
      src, 1, out_dir / "decoded_inputs", path_id(src));

  std::set<std::string> sizes;
  for (const data::FrameRef& fr : seq.frames) {
    const media::RawImage img = media::read_image(fr.path);
    sizes.insert(std::to_string(img.w) + "x" + std::to_string(img.h));
  }
  const std::string native = std::to_string(size) + "x" + std::to_string(size);
  if (sizes.size() > 1 || *sizes.begin() != native) {
    std::string found;
    for (const std::string& s : sizes) found += (found.empty() ? "" : ", ") + s;
    m.notes.push_back("input frames resized to " + native + " before inference (input sizes: " +
                      found + ")");
  }
  if (a.aux_neighbor) m.notes.push_back("auxiliary input: real neighboring frame");

  StylizeOptions opt;
  opt.out_dir = out_dir;
  opt.real_neighbor_aux = a.aux_neighbor;
  const data::FrameSequence out = stylize_video(ckpt, seq, opt);
  for (const data::FrameRef& fr : out.frames) m.outputs.push_back(fr.path.string());
  std::printf("stylized %d frames into %s\n", out.size(), out_dir.string().c_str());
  finish_manifest(m, out_dir);
}

void cmd_evaluate(const Args& a) {
  if (a.data.empty()) throw ConfigError("evaluate: --data is required");
  if (a.flows.empty()) throw ConfigError("evaluate: --flows is required");
  const fs::path out_dir = require_out(a, "evaluate");
  refuse_existing(out_dir / "report.json", a.overwrite, "evaluate");

  EvaluateOptions opt;
  opt.checkpoint = a.checkpoint;
  opt.dataset = a.data;
  opt.flow_dir = a.flows;
  opt.real_features = a.real_features;
  opt.extractor = a.extractor;
  opt.identity = a.identity;

  RunManifest m = start_manifest("evaluate");
  if (!a.identity) {
    if (a.checkpoint.empty())
      throw ConfigError("evaluate: --checkpoint is required unless --identity is given");
    m.config_yaml = read_checkpoint(a.checkpoint).config_text;
  } else {
    m.notes.push_back("identity translation (pass-through), no checkpoint");
  }

  const EvalReport report = evaluate_run(opt);
  fs::create_directories(out_dir);
  const fs::path report_path = out_dir / "report.json";
  {
    std::ofstream out(report_path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write report: " + report_path.string());
    out << report.to_json();
  }
  std::printf("fid: %.6g\nfwe: %.6g\nmse: %.6g\n", report.fid, report.fwe, report.mse);

  m.dataset_digests.emplace_back(a.data, dataset_digest(a.data));
  m.outputs.push_back(report_path.string());
  finish_manifest(m, out_dir);
}

// The three sweep axes, expanded against a base config. Standard recipe:
// offset depth {6,8,10}, warping layers {1..5} with the dilation ladder
// truncated to match, time gap {1..5}; ablation runs train for 300 epochs.
void cmd_ablate(const Args& a) {
  if (a.config.empty()) throw ConfigError("ablate: --config is required");
  const fs::path out_dir = require_out(a, "ablate");
  refuse_existing(out_dir / "run_manifest.json", a.overwrite, "ablate");
  const VariantConfig base = load_config(a.config);
  static const std::vector<int> kLadder = {3, 6, 12, 18, 24};

  RunManifest m = start_manifest("ablate");
  m.config_yaml = config_to_yaml(base);
  fs::create_directories(out_dir / "configs");

  nlohmann::ordered_json index = nlohmann::ordered_json::array();
  auto emit = [&](const std::string& axis, int value, VariantConfig cfg) {
    cfg.epochs = 300;
    cfg.validate();
    std::ostringstream name;
    name << axis << "_" << std::setw(2) << std::setfill('0') << value << ".yaml";
    const fs::path p = out_dir / "configs" / name.str();
    save_config(p, cfg);
    nlohmann::ordered_json e;
    e["axis"] = axis;
    e["value"] = value;
    e["config"] = (fs::path("configs") / name.str()).string();
    index.push_back(std::move(e));
    m.outputs.push_back(p.string());
  };

  for (int d : {6, 8, 10}) {
    VariantConfig cfg = base;
    cfg.generator.offset_depth = d;
    emit("offset_depth", d, cfg);
  }
  for (int k = 1; k <= 5; ++k) {
    VariantConfig cfg = base;
    cfg.generator.num_warping_layers = k;
    cfg.generator.dilations.assign(kLadder.begin(), kLadder.begin() + k);
    emit("warping_layers", k, cfg);
  }
  for (int g = 1; g <= 5; ++g) {
    VariantConfig cfg = base;
    cfg.time_gap = g;
    emit("time_gap", g, cfg);
  }

  const fs::path index_path = out_dir / "ablations.json";
  {
    std::ofstream out(index_path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write ablation index: " + index_path.string());
    out << index.dump(2) << "\n";
  }
  m.outputs.push_back(index_path.string());
  std::printf("wrote %zu ablation configs under %s\n", index.size(), out_dir.string().c_str());
  finish_manifest(m, out_dir);
}

}  // namespace

int main(int argc, char** argv) {
  Args a;
  CLI::App app{"unpaired video-to-video translation with in-network feature warping"};
  app.require_subcommand(1);

  app.add_option("--config", a.config, "run configuration file (train, ablate)");
  CLI::Option* seed_opt = app.add_option("--seed", a.seed, "override the config seed (train)");
  app.add_option("--out", a.out, "output directory");
  app.add_option("--device", a.device, "compute device (this build is cpu-only)")
      ->capture_default_str();
  app.add_flag("--overwrite", a.overwrite, "replace existing outputs instead of refusing");

  CLI::App* prepare = app.add_subcommand("prepare", "build a dataset root");
  prepare->add_option("--train-source", a.train_source,
                      "video file / directory of videos / directory of frames (repeatable)");
  prepare->add_option("--test-source", a.test_source, "held-out source clips (repeatable)");
  prepare->add_option("--train-target", a.train_target, "target image dir or file (repeatable)");
  prepare->add_option("--test-target", a.test_target, "held-out target images (repeatable)");
  prepare->add_option("--stride", a.stride, "keep every stride-th frame")->capture_default_str();
  prepare->add_option("--test-stride", a.test_stride,
                      "stride for the test sources (default: same as --stride)");

  CLI::App* train_cmd = app.add_subcommand("train", "train a variant from a config file");
  train_cmd->add_option("--data", a.data, "dataset root (overrides the config's `dataset:`)");
  train_cmd->add_flag("--resume", a.resume, "continue from checkpoints/latest");

  CLI::App* stylize = app.add_subcommand("stylize", "translate a clip with a checkpoint");
  stylize->add_option("--checkpoint", a.checkpoint, "trained checkpoint file");
  stylize->add_option("--frames", a.frames, "input clip: video file or directory of frames");
  stylize->add_flag("--aux-neighbor", a.aux_neighbor,
                    "feed the real neighboring frame as the auxiliary input");

  CLI::App* evaluate = app.add_subcommand("evaluate", "score a checkpoint on a test split");
  evaluate->add_option("--checkpoint", a.checkpoint, "trained checkpoint file");
  evaluate->add_option("--data", a.data, "dataset root with testA/testB splits");
  evaluate->add_option("--flows", a.flows, "directory of precomputed .fwd.flo/.bwd.flo pairs");
  evaluate->add_option("--extractor", a.extractor, "FID feature extractor")
      ->capture_default_str();
  evaluate->add_option("--real-features", a.real_features,
                       "precomputed real-side activations (WFTR file)");
  evaluate->add_flag("--identity", a.identity, "score the pass-through translation");

  CLI::App* ablate = app.add_subcommand("ablate", "expand a base config into the standard sweep");
  for (CLI::App* sub : {prepare, train_cmd, stylize, evaluate, ablate}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }
  a.has_seed = seed_opt->count() > 0;

  try {
    if (a.device != "cpu")
      throw ConfigError("device '" + a.device + "' is not available in this build (cpu only)");
    if (app.got_subcommand("prepare")) cmd_prepare(a);
    else if (app.got_subcommand("train")) cmd_train(a);
    else if (app.got_subcommand("stylize")) cmd_stylize(a);
    else if (app.got_subcommand("evaluate")) cmd_evaluate(a);
    else if (app.got_subcommand("ablate")) cmd_ablate(a);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const DataError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return 3;
  } catch (const NumericError& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return 4;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "internal error: %s\n", e.what());
    return 1;
  }
  return 0;
}
