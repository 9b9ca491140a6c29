#include "lesionuq/pipeline.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <mutex>
#include <sstream>

#include "json.hpp"
#include "lesionuq/error.hpp"
#include "lesionuq/npy.hpp"
#include "lesionuq/rng.hpp"
#include "lesionuq/synth.hpp"
#include "parallel.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace lesionuq {
namespace {

constexpr const char* kStampName = ".stamp";

std::string fingerprint(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// Configuration text that determines a scene's artifacts.
std::string scene_fingerprint(const PipelineConfig& cfg) {
  PipelineConfig c;
  c.seed = cfg.seed;
  c.synth = cfg.synth;
  c.threshold = cfg.threshold;
  c.epsilon = cfg.epsilon;
  c.dilation_iters = cfg.dilation_iters;
  c.out_dir = ".";
  return fingerprint("scene\n" + to_toml(c));
}

std::string fold_fingerprint(const PipelineConfig& cfg, int fold) {
  PipelineConfig c = cfg;
  c.out_dir = ".";
  c.jobs = 1;
  c.keep_volumes = false;
  return fingerprint("fold " + std::to_string(fold) + "\n" + to_toml(c));
}

bool stamp_matches(const fs::path& dir, const std::string& print) {
  std::ifstream in(dir / kStampName);
  std::string line;
  return in && std::getline(in, line) && line == print;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

void write_text(const fs::path& path, const std::string& text) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out << text;
    out.flush();
    if (!out) throw IoError("write failure on " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename " + tmp.string() + ": " + ec.message());
}

// Runs `write(tmp)` and moves the result into place.
template <class Fn>
void write_atomic(const fs::path& path, Fn&& write) {
  const fs::path tmp = path.string() + ".tmp";
  write(tmp);
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename " + tmp.string() + ": " + ec.message());
}

void clear_stamp(const fs::path& dir) {
  std::error_code ec;
  fs::remove(dir / kStampName, ec);
}

// Prefixes the stage to an error while keeping its kind.
template <class Fn>
auto in_stage(const std::string& stage, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const Error& e) {
    throw_error(e.kind(), "stage " + stage + ": " + e.what());
  } catch (const json::exception& e) {
    throw FormatError("stage " + stage + ": " + e.what());
  } catch (const fs::filesystem_error& e) {
    throw IoError("stage " + stage + ": " + e.what());
  }
}

json summary_json(const ScanSummary& s) {
  return {{"scan_id", s.scan_id}, {"dice", s.dice}, {"tp_lesions", s.tp}, {"fp_lesions", s.fp}};
}

ScanSummary read_summary(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  const json j = json::parse(in);
  return {j.at("scan_id").get<std::string>(), j.at("dice").get<double>(),
          j.at("tp_lesions").get<std::size_t>(), j.at("fp_lesions").get<std::size_t>()};
}

LabelVolume binary_mask(const LabelVolume& labels) {
  LabelVolume out(labels.dims());
  for (std::size_t i = 0; i < labels.size(); ++i) out[i] = labels[i] != 0;
  return out;
}

ScoreTable rows_for(const GraphDataset& data) {
  ScoreTable t;
  t.rows.reserve(data.graphs.size());
  for (const auto& g : data.graphs) {
    ScoreRow r;
    r.scan_id = g.scan_id;
    r.lesion_id = g.lesion_id;
    r.size = g.size;
    r.iou_adj = g.iou_adj;
    r.tp = g.tp;
    t.rows.push_back(std::move(r));
  }
  return t;
}

GraphDataset empty_dataset(int n_channels) {
  GraphDataset d;
  d.n_channels = n_channels;
  d.feature_names = feature_names(n_channels);
  return d;
}

GraphDataset gather(const std::vector<GraphDataset>& scenes, const std::vector<int>& indices) {
  std::vector<GraphDataset> parts;
  for (int i : indices) parts.push_back(scenes[static_cast<std::size_t>(i)]);
  if (parts.empty()) return empty_dataset(1);
  return merge_datasets(parts);
}

std::string train_log_csv(const TrainResult& result) {
  std::ostringstream o;
  o << "epoch,lr,train_loss,val_loss\n";
  char buf[128];
  for (const auto& e : result.log) {
    std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g\n", e.epoch, e.lr, e.train_loss,
                  e.val_loss);
    o << buf;
  }
  return o.str();
}

json split_json(const FoldSplit& s, const std::vector<std::string>& ids) {
  auto names = [&](const std::vector<int>& idx) {
    json a = json::array();
    for (int i : idx) a.push_back(ids[static_cast<std::size_t>(i)]);
    return a;
  };
  return {{"test", names(s.test)}, {"validation", names(s.validation)}, {"train", names(s.train)}};
}

void write_report_files(const EvalReport& report, const fs::path& dir) {
  write_atomic(dir / "report.csv", [&](const fs::path& p) { write_report_csv(report, p); });
  write_atomic(dir / "scans.csv", [&](const fs::path& p) { write_scan_csv(report, p); });
  if (!report.methods.empty() && !report.methods.front().curve.points.empty()) {
    ensure_dir(dir / "curves");
    for (const auto& m : report.methods) {
      write_atomic(dir / "curves" / (m.method + ".csv"),
                   [&](const fs::path& p) { write_curve_csv(m.curve, p); });
    }
    write_atomic(dir / "curves.svg", [&](const fs::path& p) { write_curves_svg(report, p); });
  }
}

// ---- directory stages -------------------------------------------------------

fs::path locate(const fs::path& data, const fs::path& out, const std::string& scan,
                const std::string& name) {
  for (const auto& root : {out, data}) {
    const auto p = root / scan / name;
    if (fs::exists(p)) return p;
  }
  throw IoError("missing " + name + " for scene " + scan + " (looked in " + out.string() +
                " and " + data.string() + ")");
}

std::vector<fs::path> numbered_files(const fs::path& dir, const std::string& prefix) {
  std::vector<fs::path> files;
  std::error_code ec;
  for (const auto& entry : fs::directory_iterator(dir, ec)) {
    const auto name = entry.path().filename().string();
    if (entry.is_regular_file() && name.rfind(prefix, 0) == 0 && entry.path().extension() == ".npy") {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  return files;
}

std::vector<Volume> load_intensities(const fs::path& data, const fs::path& out,
                                     const std::string& scan) {
  std::vector<Volume> channels;
  for (const auto& root : {out, data}) {
    const auto single = root / scan / "intensity.npy";
    if (fs::exists(single)) {
      channels.push_back(load_volume(single));
      return channels;
    }
    for (const auto& p : numbered_files(root / scan, "intensity_")) channels.push_back(load_volume(p));
    if (!channels.empty()) return channels;
  }
  throw IoError("no intensity channels for scene " + scan);
}

UncertaintyMaps load_maps(const fs::path& data, const fs::path& out, const std::string& scan) {
  UncertaintyMaps maps;
  maps.mean_prob = load_volume(locate(data, out, scan, "mean_prob.npy"));
  maps.entropy = load_volume(locate(data, out, scan, "entropy.npy"));
  maps.variance = load_volume(locate(data, out, scan, "variance.npy"));
  maps.pcs_uncertainty = load_volume(locate(data, out, scan, "pcs_uncertainty.npy"));
  return maps;
}

}  // namespace

ScanResult process_scan(const std::string& scan_id, const McEnsemble& ensemble,
                        std::span<const Volume> intensities, const LabelVolume& gt,
                        const ScanOptions& options) {
  ScanResult r;
  r.scan_id = scan_id;
  r.maps = compute_maps(ensemble);
  if (gt.dims() != r.maps.dims()) throw ShapeError("ground truth dims differ from the ensemble");
  r.seg = binarize(r.maps.mean_prob, options.threshold);
  const LabelVolume gt_mask = binary_mask(gt);
  r.lesions = match_lesions(r.seg, gt_mask, options.epsilon);
  r.graphs = empty_dataset(static_cast<int>(intensities.size()));
  for (const auto& lesion : r.lesions) {
    r.graphs.graphs.push_back(
        build_graph(lesion, intensities, r.seg, r.maps, options.dilation_iters, scan_id));
  }
  r.summary.scan_id = scan_id;
  r.summary.dice = dice(r.seg, gt_mask);
  for (const auto& l : r.lesions) (l.tp ? r.summary.tp : r.summary.fp) += 1;
  return r;
}

ScoreTable score_gcnn(const GraphDataset& data, const GcnnModel& model, const std::string& method) {
  ScoreTable t = rows_for(data);
  t.methods = {method};
  for (std::size_t i = 0; i < data.graphs.size(); ++i) {
    t.rows[i].scores = {predict_uncertainty(data.graphs[i], model)};
  }
  return t;
}

ScoreTable score_baseline_methods(const GraphDataset& train, const GraphDataset& data) {
  std::vector<LesionFeatures> features;
  std::vector<int> tp;
  std::vector<double> iou;
  for (const auto& g : train.graphs) {
    features.push_back(lesion_features(g));
    tp.push_back(g.tp ? 1 : 0);
    iou.push_back(g.iou_adj);
  }
  const auto classif = fit_metaseg(features, tp, iou, MetaSegKind::Classification);
  const auto reg = fit_metaseg(features, tp, iou, MetaSegKind::Regression);

  ScoreTable t = rows_for(data);
  t.methods.assign(kMethodNames.begin() + 2, kMethodNames.end());
  for (std::size_t i = 0; i < data.graphs.size(); ++i) {
    const auto s = score_baselines(lesion_features(data.graphs[i]), classif, reg);
    t.rows[i].scores = {s.entropy_mean, s.entropy_logsum, s.variance_mean,
                        s.variance_logsum, s.pcs_mean, s.pcs_logsum,
                        s.size, s.metaseg_classif, s.metaseg_reg};
  }
  return t;
}

std::vector<FoldSplit> make_folds(int n_scenes, int folds, std::uint64_t seed) {
  if (folds < 2 || n_scenes < 2 * folds) {
    throw ConfigError("need folds >= 2 and at least two scenes per fold");
  }
  std::vector<int> perm(static_cast<std::size_t>(n_scenes));
  for (int i = 0; i < n_scenes; ++i) perm[static_cast<std::size_t>(i)] = i;
  Rng rng(derive_seed(seed, 0, "folds"));
  rng.shuffle(std::span<int>(perm));

  std::vector<FoldSplit> out;
  for (int f = 0; f < folds; ++f) {
    const auto lo = static_cast<std::size_t>(static_cast<long>(f) * n_scenes / folds);
    const auto hi = static_cast<std::size_t>(static_cast<long>(f + 1) * n_scenes / folds);
    FoldSplit s;
    std::vector<int> rest;
    for (std::size_t i = 0; i < perm.size(); ++i) {
      (i >= lo && i < hi ? s.test : rest).push_back(perm[i]);
    }
    const auto n_val = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(0.2 * static_cast<double>(rest.size()))));
    s.validation.assign(rest.begin(), rest.begin() + static_cast<std::ptrdiff_t>(n_val));
    s.train.assign(rest.begin() + static_cast<std::ptrdiff_t>(n_val), rest.end());
    std::sort(s.test.begin(), s.test.end());
    std::sort(s.validation.begin(), s.validation.end());
    std::sort(s.train.begin(), s.train.end());
    out.push_back(std::move(s));
  }
  return out;
}

PipelineResult run_pipeline(const PipelineConfig& cfg_in) {
  PipelineConfig cfg = cfg_in;
  cfg.sync();
  cfg.validate();
  const fs::path root = cfg.out_dir;
  ensure_dir(root);
  write_text(root / "config.toml", to_toml(cfg));

  const ScanOptions options{cfg.threshold, cfg.epsilon, cfg.dilation_iters};
  const auto n_scenes = static_cast<std::size_t>(cfg.synth.n_scenes);
  std::vector<std::string> ids(n_scenes);
  for (std::size_t i = 0; i < n_scenes; ++i) ids[i] = scene_id(static_cast<int>(i));

  // Scenes: synth -> maps -> extract -> graphs, one directory each.
  const std::string scene_print = scene_fingerprint(cfg);
  std::vector<GraphDataset> scene_graphs(n_scenes);
  std::vector<ScanSummary> summaries(n_scenes);
  std::mutex log_mutex;
  detail::parallel_for(n_scenes, cfg.jobs, [&](std::size_t i) {
    const fs::path dir = root / "scenes" / ids[i];
    in_stage("scene " + ids[i], [&] {
      if (!stamp_matches(dir, scene_print)) {
        ensure_dir(dir);
        clear_stamp(dir);
        const Scene scene = in_stage("synth", [&] { return generate_scene(cfg.synth, static_cast<int>(i)); });
        const std::vector<Volume> channels{scene.intensity};
        const ScanResult r = in_stage("graphs", [&] {
          return process_scan(scene.scan_id, scene.ensemble, channels, scene.gt, options);
        });
        write_atomic(dir / "graphs.jsonl", [&](const fs::path& p) { write_graph_dataset(r.graphs, p); });
        write_text(dir / "scan.json", summary_json(r.summary).dump(2) + "\n");
        if (cfg.keep_volumes) {
          write_scene(scene, dir.parent_path());
          save_volume(r.maps.mean_prob, dir / "mean_prob.npy");
          save_volume(r.maps.entropy, dir / "entropy.npy");
          save_volume(r.maps.variance, dir / "variance.npy");
          save_volume(r.maps.pcs_uncertainty, dir / "pcs_uncertainty.npy");
          save_labels(r.seg, dir / "seg.npy");
        }
        write_text(dir / kStampName, scene_print + "\n");
        std::lock_guard lock(log_mutex);
        spdlog::info("{}: {} lesions ({} TP, {} FP), dice {:.3f}", ids[i], r.lesions.size(),
                     r.summary.tp, r.summary.fp, r.summary.dice);
      } else {
        std::lock_guard lock(log_mutex);
        spdlog::debug("{}: up to date", ids[i]);
      }
      scene_graphs[i] = read_graph_dataset(dir / "graphs.jsonl");
      if (scene_graphs[i].graphs.empty()) scene_graphs[i] = empty_dataset(1);
      summaries[i] = read_summary(dir / "scan.json");
    });
  });

  // Folds: train on validation scenes, score and evaluate test scenes.
  const auto splits = make_folds(cfg.synth.n_scenes, cfg.folds, cfg.seed);
  std::vector<EvalReport> reports(splits.size());
  detail::parallel_for(splits.size(), cfg.jobs, [&](std::size_t f) {
    const auto fold = static_cast<int>(f);
    const std::string name = "fold_" + std::to_string(fold);
    const fs::path dir = root / name;
    const auto& split = splits[f];
    std::vector<ScanSummary> test_scans;
    for (int i : split.test) test_scans.push_back(summaries[static_cast<std::size_t>(i)]);

    in_stage(name, [&] {
      const std::string print = fold_fingerprint(cfg, fold);
      ScoreTable scores;
      if (stamp_matches(dir, print)) {
        scores = read_score_table(dir / "scores.csv");
      } else {
        ensure_dir(dir);
        clear_stamp(dir);
        write_text(dir / "split.json", split_json(split, ids).dump(2) + "\n");
        const GraphDataset train_set = gather(scene_graphs, split.validation);
        const GraphDataset test_set = gather(scene_graphs, split.test);
        if (test_set.graphs.empty()) throw EvaluationError("test split holds no lesions");

        std::vector<ScoreTable> parts;
        for (const Variant v : {Variant::Classification, Variant::Regression}) {
          TrainConfig tc = cfg.train;
          tc.variant = v;
          tc.seed = derive_seed(cfg.seed, f, std::string("train-") + to_string(v));
          const std::string tag = v == Variant::Classification ? "classif" : "reg";
          const TrainResult result = in_stage("train " + tag, [&] { return train(train_set, tc); });
          write_atomic(dir / ("gcnn_" + tag + ".model"),
                       [&](const fs::path& p) { save_model(result.model, p); });
          write_text(dir / ("train_log_" + tag + ".csv"), train_log_csv(result));
          parts.push_back(in_stage("score", [&] {
            return score_gcnn(test_set, result.model,
                              v == Variant::Classification ? "GCNN_Classif" : "GCNN_Reg");
          }));
          std::lock_guard lock(log_mutex);
          spdlog::info("{}: trained GCNN {} on {} graphs, best epoch {}", name, tag,
                       train_set.graphs.size(), result.best_epoch);
        }
        parts.push_back(in_stage("baselines", [&] { return score_baseline_methods(train_set, test_set); }));
        scores = join_tables(parts);
        sort_rows(scores);
        write_atomic(dir / "scores.csv", [&](const fs::path& p) { write_score_table(scores, p); });
      }
      reports[f] = in_stage("eval", [&] { return build_report(scores, test_scans); });
      write_report_files(reports[f], dir);
      if (!stamp_matches(dir, print)) write_text(dir / kStampName, print + "\n");
    });
  });

  PipelineResult result;
  result.folds = reports;
  result.report = in_stage("eval", [&] { return average_reports(reports); });
  in_stage("eval", [&] { write_report_files(result.report, root); });
  return result;
}

std::vector<std::string> list_scenes(const fs::path& data) {
  std::vector<std::string> out;
  std::error_code ec;
  fs::directory_iterator it(data, ec);
  if (ec) throw IoError("cannot list " + data.string() + ": " + ec.message());
  for (const auto& entry : it) {
    const auto name = entry.path().filename().string();
    if (entry.is_directory() && !name.empty() && name[0] != '.') out.push_back(name);
  }
  std::sort(out.begin(), out.end());
  if (out.empty()) throw IoError("no scene directories under " + data.string());
  return out;
}

void stage_maps(const fs::path& data, const fs::path& out, int jobs) {
  const auto scenes = list_scenes(data);
  detail::parallel_for(scenes.size(), jobs, [&](std::size_t i) {
    const auto& scan = scenes[i];
    McEnsemble ensemble;
    for (const auto& p : numbered_files(data / scan, "sample_")) ensemble.samples.push_back(load_volume(p));
    const auto maps = compute_maps(ensemble);
    const auto dir = out / scan;
    ensure_dir(dir);
    save_volume(maps.mean_prob, dir / "mean_prob.npy");
    save_volume(maps.entropy, dir / "entropy.npy");
    save_volume(maps.variance, dir / "variance.npy");
    save_volume(maps.pcs_uncertainty, dir / "pcs_uncertainty.npy");
  });
}

void stage_extract(const fs::path& data, const fs::path& out, const ScanOptions& options,
                   int jobs) {
  const auto scenes = list_scenes(data);
  detail::parallel_for(scenes.size(), jobs, [&](std::size_t i) {
    const auto& scan = scenes[i];
    const Volume mean = load_volume(locate(data, out, scan, "mean_prob.npy"));
    const LabelVolume gt = binary_mask(load_labels(locate(data, out, scan, "gt.npy")));
    const LabelVolume seg = binarize(mean, options.threshold);
    const auto lesions = match_lesions(seg, gt, options.epsilon);
    const auto dir = out / scan;
    ensure_dir(dir);
    save_labels(seg, dir / "seg.npy");
    save_labels(connected_components_26(seg).labels, dir / "lesions.npy");
    std::ostringstream csv;
    csv << "lesion_id,size,iou_adj,tp\n";
    ScanSummary summary{scan, dice(seg, gt), 0, 0};
    char buf[96];
    for (const auto& l : lesions) {
      std::snprintf(buf, sizeof(buf), "%u,%zu,%.17g,%d\n", l.id, l.size(), l.iou_adj, l.tp ? 1 : 0);
      csv << buf;
      (l.tp ? summary.tp : summary.fp) += 1;
    }
    write_text(dir / "lesions.csv", csv.str());
    write_text(dir / "scan.json", summary_json(summary).dump(2) + "\n");
  });
}

void stage_graphs(const fs::path& data, const fs::path& out, const ScanOptions& options,
                  int jobs) {
  const auto scenes = list_scenes(data);
  std::vector<GraphDataset> parts(scenes.size());
  detail::parallel_for(scenes.size(), jobs, [&](std::size_t i) {
    const auto& scan = scenes[i];
    const auto maps = load_maps(data, out, scan);
    const LabelVolume seg = load_labels(locate(data, out, scan, "seg.npy"));
    const LabelVolume gt = binary_mask(load_labels(locate(data, out, scan, "gt.npy")));
    const auto channels = load_intensities(data, out, scan);
    const auto lesions = match_lesions(seg, gt, options.epsilon);
    GraphDataset d = empty_dataset(static_cast<int>(channels.size()));
    for (const auto& l : lesions) {
      d.graphs.push_back(build_graph(l, channels, seg, maps, options.dilation_iters, scan));
    }
    ensure_dir(out / scan);
    write_graph_dataset(d, out / scan / "graphs.jsonl");
    parts[i] = std::move(d);
  });
  write_graph_dataset(merge_datasets(parts), out / "graphs.jsonl");
}

}  // namespace lesionuq
