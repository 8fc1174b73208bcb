#include "sha256.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <xmc/data/generator.hpp>
#include <xmc/data/gold.hpp>
#include <xmc/eval/tasks.hpp>
#include <xmc/text/listing.hpp>
#include <xmc/train/trainer.hpp>
#include <xmc/visual/cam.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace xmc;

namespace {

constexpr const char* kToolVersion = "xmc 1.0.0";

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RunManifest {
  std::string command;
  train::TrainConfig config;
  std::uint64_t seed = 0;
  std::vector<std::pair<std::string, std::string>> inputs;  // label -> sha256
  std::vector<std::string> outputs;

  json to_json() const {
    json cfg = json::object();
    std::istringstream lines(train::to_text(config));
    for (std::string line; std::getline(lines, line);)
      if (auto eq = line.find('='); eq != std::string::npos) cfg[line.substr(0, eq)] = line.substr(eq + 1);
    json in = json::object();
    for (const auto& [k, v] : inputs) in[k] = v;
    return {{"command", command}, {"config", cfg},     {"seed", seed},
            {"inputs", in},       {"outputs", outputs}, {"tool_version", kToolVersion}};
  }

  void write(const fs::path& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write run manifest '" + path.string() + "'");
    out << to_json().dump(2) << '\n';
  }
};

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create '" + dir.string() + "': " + ec.message());
}

std::string config_digest(const train::TrainConfig& c) { return tools::sha256_hex(train::to_text(c)); }

struct Dataset {
  std::string manifest;
  fs::path root;
  std::vector<data::MultimodalSample> samples;

  fs::path gold(const char* name) const { return root / name; }
};

Dataset open_dataset(const std::string& where, std::size_t image_size) {
  Dataset d;
  d.manifest = fs::is_directory(where) ? (fs::path(where) / "manifest.tsv").string() : where;
  d.root = fs::path(d.manifest).parent_path();
  d.samples = data::load_manifest(d.manifest, {image_size, true});
  return d;
}

// Digest of the manifest plus one combined digest of every referenced image
// in manifest order.
void digest_dataset(const Dataset& d, RunManifest& m) {
  m.inputs.emplace_back(d.manifest, tools::sha256_file(d.manifest));
  tools::Sha256 images;
  for (const auto& s : d.samples) images.update(tools::sha256_file(data::resolve_image(d.manifest, s)));
  m.inputs.emplace_back("images", images.hex());
}

train::TrainConfig read_config(const std::string& path, const std::vector<std::string>& settings) {
  train::TrainConfig c = path.empty() ? train::TrainConfig{} : train::load_config(path);
  for (const auto& kv : settings) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw UsageError("--set expects key=value, got '" + kv + "'");
    train::apply_setting(c, train::detail::trim(kv.substr(0, eq)), train::detail::trim(kv.substr(eq + 1)));
  }
  c.validate();
  return c;
}

std::vector<std::vector<std::string>> captions(const Dataset& d, const std::string& split) {
  std::vector<std::vector<std::string>> out;
  for (const auto& s : d.samples)
    if (s.split == split) out.push_back(train::tokenize(s.caption));
  return out;
}

std::vector<eval::EvalSample> eval_samples(const Dataset& d, std::size_t image_size) {
  std::vector<eval::EvalSample> out;
  for (const auto& s : d.samples) {
    if (s.split != "test") continue;
    eval::EvalSample e{data::load_image(data::resolve_image(d.manifest, s), image_size),
                       {s.classes.begin(), s.classes.end()},
                       {}};
    for (const auto& b : s.boxes) e.boxes.push_back(b.box);
    out.push_back(std::move(e));
  }
  return out;
}

// ---- gen -------------------------------------------------------------------

struct GenArgs {
  std::string out;
  std::uint64_t seed = 0;
  std::size_t train = 2000, test = 300, themes = 3;
};

int cmd_gen(const GenArgs& a) {
  const auto spec = data::WorldSpec::standard(a.themes);
  ensure_dir(a.out);
  RunManifest m;
  m.command = "gen";
  m.seed = a.seed;
  m.config.seed = a.seed;
  // relative to the output directory, so identical runs give identical trees
  for (const char* f : {"manifest.tsv", "taxonomy.tsv", "assoc.tsv", "concreteness.tsv", "images/"})
    m.outputs.push_back(f);
  m.write(fs::path(a.out) / "run_gen.json");
  const auto paths = data::generate_dataset(spec, a.train, a.test, a.seed, a.out);
  std::cout << "wrote " << a.train + a.test << " samples to " << paths.manifest << '\n';
  return 0;
}

// ---- train -----------------------------------------------------------------

struct TrainArgs {
  std::string data, config, ckpt_dir;
  std::vector<std::string> settings;
  std::optional<std::size_t> epochs;
  std::optional<std::uint64_t> seed;
};

int cmd_train(const TrainArgs& a) {
  auto config = read_config(a.config, a.settings);
  if (a.epochs) config.epochs = *a.epochs;
  if (a.seed) config.seed = *a.seed;
  config.validate();
  const auto ds = open_dataset(a.data, config.encoder.image_size);

  ensure_dir(a.ckpt_dir);
  const fs::path dir(a.ckpt_dir);
  RunManifest m;
  m.command = "train";
  m.config = config;
  m.seed = config.seed;
  if (!a.config.empty()) m.inputs.emplace_back(a.config, tools::sha256_file(a.config));
  digest_dataset(ds, m);
  if (config.checkpoint_interval > 0)
    for (std::size_t e = config.checkpoint_interval; e < config.epochs; e += config.checkpoint_interval)
      for (const char* ext : {".xmck", ".counts.tsv"}) m.outputs.push_back((dir / (train::epoch_tag(e) + ext)).string());
  for (const char* f : {"final.xmck", "final.counts.tsv", "train_log.csv", "config.txt"})
    m.outputs.push_back((dir / f).string());
  m.write(dir / "run_train.json");

  std::vector<train::TrainingExample> examples;
  for (const auto& s : ds.samples)
    if (s.split == "train")
      examples.push_back(
          {data::load_image(data::resolve_image(ds.manifest, s), config.encoder.image_size), train::tokenize(s.caption)});
  if (examples.empty()) throw FormatError("dataset '" + ds.manifest + "' has no train samples");

  train::FitOptions opt;
  opt.threads = default_threads();
  opt.checkpoint_dir = a.ckpt_dir;
  opt.on_epoch = [&](std::size_t epoch, double loss) {
    std::cerr << "epoch " << epoch + 1 << "/" << config.epochs << " mean loss " << loss << '\n';
  };
  const auto result = train::fit(examples, config, opt);
  io::write_file((dir / "train_log.csv").string(), result.log.to_csv());
  io::write_file((dir / "config.txt").string(), train::to_text(config));
  return 0;
}

// ---- eval ------------------------------------------------------------------

struct EvalArgs {
  std::string ckpt, counts, data, task, out, config;
  std::vector<std::string> settings;
  std::optional<std::uint64_t> seed;
};

const std::vector<std::string> kTasks{"clustering", "association", "concreteness", "classification", "localization",
                                      "baselines"};

// Without --config, eval falls back to the config.txt that train leaves next
// to the checkpoint or counts file.
std::string sibling_config(const std::vector<std::string>& files) {
  for (const auto& f : files) {
    if (f.empty()) continue;
    const auto p = fs::path(f).parent_path() / "config.txt";
    if (fs::exists(p)) return p.string();
  }
  return {};
}

void check_checkpoint_n(const std::string& ckpt, const train::TrainConfig& config) {
  const auto params = visual::decode_checkpoint<float>(io::read_file(ckpt), ckpt);
  const auto arch = visual::config_from_parameters(params, config.encoder);
  if (arch.n_clusters != config.encoder.n_clusters)
    throw UsageError("checkpoint '" + ckpt + "' has N=" + std::to_string(arch.n_clusters) +
                     " but config has n_clusters=" + std::to_string(config.encoder.n_clusters));
}

int cmd_eval(const EvalArgs& a) {
  const std::string config_path = a.config.empty() ? sibling_config({a.ckpt, a.counts}) : a.config;
  auto config = read_config(config_path, a.settings);
  if (a.seed) config.seed = *a.seed;
  const bool needs_net = a.task == "classification" || a.task == "localization";
  const bool needs_counts = a.task != "localization" && a.task != "baselines";
  if (needs_net && a.ckpt.empty()) throw UsageError("task '" + a.task + "' needs --ckpt");
  if ((needs_counts || a.task == "classification") && a.counts.empty())
    throw UsageError("task '" + a.task + "' needs --counts");

  const auto ds = open_dataset(a.data, config.encoder.image_size);
  ensure_dir(a.out);
  const fs::path out(a.out);
  RunManifest m;
  m.command = "eval " + a.task;
  m.config = config;
  m.seed = config.seed;
  if (!config_path.empty()) m.inputs.emplace_back(config_path, tools::sha256_file(config_path));
  if (!a.ckpt.empty()) m.inputs.emplace_back(a.ckpt, tools::sha256_file(a.ckpt));
  if (!a.counts.empty()) m.inputs.emplace_back(a.counts, tools::sha256_file(a.counts));
  digest_dataset(ds, m);
  const std::vector<std::string> stems =
      a.task == "baselines"
          ? std::vector<std::string>{"random_clustering", "kmeans_text_only", "localization_random",
                                     "classification_all_classes", "textonly_concreteness"}
          : std::vector<std::string>{a.task};
  for (const auto& s : stems) {
    m.outputs.push_back((out / (s + ".txt")).string());
    m.outputs.push_back((out / (s + ".csv")).string());
  }
  m.write(out / ("run_eval_" + a.task + ".json"));

  std::optional<visual::Network<float>> net;
  if (!a.ckpt.empty()) {
    check_checkpoint_n(a.ckpt, config);
    net = visual::load_checkpoint<float>(a.ckpt, config.encoder);
  }
  std::optional<text::CooccurrenceTable> table;
  if (!a.counts.empty()) {
    table = text::load_counts(a.counts);
    if (table->n_clusters() != config.encoder.n_clusters)
      throw UsageError("counts file has N=" + std::to_string(table->n_clusters()) + " but config has n_clusters=" +
                       std::to_string(config.encoder.n_clusters));
  }

  const double theta_t = config.text.text_threshold, theta_v = config.encoder.visual_threshold;
  const std::size_t threads = default_threads();
  const std::string digest = config_digest(config);
  auto emit = [&](eval::MetricsReport r, const std::string& stem) {
    if (r.seed == 0) r.seed = config.seed;
    r.config_digest = digest;
    r.write((out / stem).string());
    std::cout << r.to_text();
  };

  if (a.task == "clustering") {
    emit(eval::clustering_eval(*table, data::load_taxonomy(ds.gold("taxonomy.tsv").string()), theta_t), a.task);
  } else if (a.task == "association") {
    emit(eval::association_eval(*table, data::load_taxonomy(ds.gold("taxonomy.tsv").string()),
                                data::load_association(ds.gold("assoc.tsv").string()), theta_t),
         a.task);
  } else if (a.task == "concreteness") {
    emit(eval::model_concreteness_eval(*table, data::load_concreteness(ds.gold("concreteness.tsv").string()),
                                       eval::token_frequency(captions(ds, "train"))),
         a.task);
  } else if (a.task == "classification") {
    const auto words = eval::gold_words(data::load_taxonomy(ds.gold("taxonomy.tsv").string()));
    emit(eval::multilabel_eval(eval_samples(ds, config.encoder.image_size), *net,
                               eval::build_class_map(words, *table, theta_t), theta_v, threads),
         a.task);
  } else if (a.task == "localization") {
    emit(eval::localization_eval(eval_samples(ds, config.encoder.image_size), *net, theta_v, threads), a.task);
  } else {
    const auto tax = data::load_taxonomy(ds.gold("taxonomy.tsv").string());
    const auto assoc = data::load_association(ds.gold("assoc.tsv").string());
    const auto corpus = captions(ds, "train");
    const auto samples = eval_samples(ds, config.encoder.image_size);
    emit(eval::random_clustering_eval(tax, assoc, config.seed), "random_clustering");
    emit(eval::kmeans_text_eval(corpus, tax, assoc, config.seed), "kmeans_text_only");
    emit(eval::random_box_eval(samples, static_cast<int>(config.encoder.image_size), config.seed),
         "localization_random");
    emit(eval::all_classes_eval(samples, eval::gold_words(tax)), "classification_all_classes");
    emit(eval::textonly_concreteness_eval(corpus, data::load_concreteness(ds.gold("concreteness.tsv").string())),
         "textonly_concreteness");
  }
  return 0;
}

// ---- cam -------------------------------------------------------------------

struct CamArgs {
  std::string ckpt, image, out, config;
  std::vector<std::string> settings;
};

int cmd_cam(const CamArgs& a) {
  const auto config = read_config(a.config.empty() ? sibling_config({a.ckpt}) : a.config, a.settings);
  check_checkpoint_n(a.ckpt, config);
  ensure_dir(a.out);
  const fs::path out(a.out);
  RunManifest m;
  m.command = "cam";
  m.config = config;
  m.seed = config.seed;
  m.inputs.emplace_back(a.ckpt, tools::sha256_file(a.ckpt));
  m.inputs.emplace_back(a.image, tools::sha256_file(a.image));
  m.outputs.push_back((out / "boxes.txt").string());
  m.outputs.push_back((out / "cam_<cluster>.pgm").string());
  m.write(out / "run_cam.json");

  const auto net = visual::load_checkpoint<float>(a.ckpt, config.encoder);
  const auto image = data::load_image(a.image, config.encoder.image_size);
  const auto inf = net.infer(image);
  const auto predicted = visual::predict_clusters<float>(std::span<const float>(inf.probs.ptr(), net.n_clusters()),
                                                         config.encoder.visual_threshold);
  const auto clusters = predicted.set_bits();
  std::string lines;
  for (const auto& cam : visual::compute_cams(net, image, std::span<const std::size_t>(clusters))) {
    io::write_file((out / ("cam_" + std::to_string(cam.cluster) + ".pgm")).string(),
                   data::encode_pgm(visual::heatmap_to_gray(cam.upsampled), cam.upsampled.width,
                                    cam.upsampled.height));
    lines += "cluster " + std::to_string(cam.cluster);
    if (const auto box = visual::extract_box(cam))
      lines += " box " + std::to_string(box->x_min) + " " + std::to_string(box->y_min) + " " +
               std::to_string(box->x_max) + " " + std::to_string(box->y_max) + "\n";
    else
      lines += " no-box\n";
  }
  io::write_file((out / "boxes.txt").string(), lines);
  std::cout << lines;
  return 0;
}

// ---- dump-clusters ---------------------------------------------------------

struct DumpArgs {
  std::string counts, out, config;
  std::vector<std::string> settings;
};

int cmd_dump_clusters(const DumpArgs& a) {
  const auto config = read_config(a.config.empty() ? sibling_config({a.counts}) : a.config, a.settings);
  RunManifest m;
  m.command = "dump-clusters";
  m.config = config;
  m.seed = config.seed;
  m.inputs.emplace_back(a.counts, tools::sha256_file(a.counts));
  if (a.out.empty()) {
    std::cerr << m.to_json().dump() << '\n';
  } else {
    ensure_dir(a.out);
    m.outputs.push_back((fs::path(a.out) / "clusters.txt").string());
    m.write(fs::path(a.out) / "run_dump_clusters.json");
  }
  const auto listing = text::format_cluster_listing(text::load_counts(a.counts), config.text.text_threshold);
  if (!a.out.empty()) io::write_file((fs::path(a.out) / "clusters.txt").string(), listing);
  std::cout << listing;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Self-supervised joint clustering of images and caption words"};
  app.require_subcommand(1);

  GenArgs gen;
  auto* g = app.add_subcommand("gen", "generate a synthetic shapes-world dataset");
  g->add_option("--out", gen.out, "output directory")->required();
  g->add_option("--seed", gen.seed, "generator seed");
  g->add_option("--train", gen.train, "number of train scenes");
  g->add_option("--test", gen.test, "number of test scenes");
  g->add_option("--themes", gen.themes, "scene themes (1-4)")->check(CLI::Range(1, 4));

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "train the visual encoder and the counts table");
  t->add_option("--data", tr.data, "dataset directory or manifest")->required();
  t->add_option("--config", tr.config, "key=value config file");
  t->add_option("--set", tr.settings, "override a config key (key=value), repeatable");
  t->add_option("--epochs", tr.epochs, "override epochs");
  t->add_option("--seed", tr.seed, "override seed");
  t->add_option("--ckpt-dir", tr.ckpt_dir, "output directory for checkpoints and logs")->required();

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "evaluate a trained model");
  e->add_option("--ckpt", ev.ckpt, "network checkpoint");
  e->add_option("--counts", ev.counts, "counts table");
  e->add_option("--data", ev.data, "dataset directory or manifest")->required();
  e->add_option("--task", ev.task, "evaluation task")->required()->check(CLI::IsMember(kTasks));
  e->add_option("--out", ev.out, "report directory")->required();
  e->add_option("--config", ev.config, "key=value config file");
  e->add_option("--set", ev.settings, "override a config key (key=value), repeatable");
  e->add_option("--seed", ev.seed, "override seed");

  CamArgs cam;
  auto* c = app.add_subcommand("cam", "class activation maps for one image");
  c->add_option("--ckpt", cam.ckpt, "network checkpoint")->required();
  c->add_option("--image", cam.image, "PPM image")->required();
  c->add_option("--out", cam.out, "output directory")->required();
  c->add_option("--config", cam.config, "key=value config file");
  c->add_option("--set", cam.settings, "override a config key (key=value), repeatable");

  DumpArgs dump;
  auto* d = app.add_subcommand("dump-clusters", "list the words assigned to each cluster");
  d->add_option("--counts", dump.counts, "counts table")->required();
  d->add_option("--out", dump.out, "also write clusters.txt here");
  d->add_option("--config", dump.config, "key=value config file");
  d->add_option("--set", dump.settings, "override a config key (key=value), repeatable");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*g) return cmd_gen(gen);
    if (*t) return cmd_train(tr);
    if (*e) return cmd_eval(ev);
    if (*c) return cmd_cam(cam);
    if (*d) return cmd_dump_clusters(dump);
  } catch (const UsageError& err) {
    std::cerr << "error: " << err.what() << '\n';
    return 2;
  } catch (const ConfigError& err) {
    std::cerr << "error: " << err.what() << '\n';
    return 2;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << '\n';
    return 1;
  }
  return 2;
}
