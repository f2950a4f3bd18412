// adgan: synthetic data generation, training, editing, evaluation and
// gradient checking from one binary.
//
// Exit codes:
//   0  success
//   1  unexpected failure
//   2  configuration or command-line error
//   3  I/O error
//   4  numerical failure (non-finite loss, failed gradient check)
//   5  malformed file (checkpoint format, attribute file parse)
//   6  contract violation (shape, schema, attribute range)

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "adgan/data/synthetic.hpp"
#include "adgan/evaluation.hpp"
#include "adgan/gradcheck_suite.hpp"
#include "adgan/training/trainer.hpp"

namespace fs = std::filesystem;
using namespace adgan;

namespace {

enum Exit { kOk = 0, kOther = 1, kConfig = 2, kIo = 3, kNumeric = 4, kFormat = 5, kContract = 6 };

struct ConfigArgs {
  std::string config_file;
  std::vector<std::string> sets;
  std::string dataset, data_dir, out_dir;
  std::uint64_t steps = 0, seed = 0;
  bool has_steps = false, has_seed = false;
};

void add_config_flags(CLI::App* cmd, ConfigArgs& a) {
  cmd->add_option("--config", a.config_file, "key = value config file");
  cmd->add_option("--set", a.sets, "override one key: --set key=value (repeatable)");
  cmd->add_option("--dataset", a.dataset, "synthetic | celeba");
  cmd->add_option("--data-dir", a.data_dir, "CelebA-layout directory (default: $ADGAN_DATA_DIR)");
  cmd->add_option("--out-dir", a.out_dir, "output directory");
  cmd->add_option("--steps", a.steps, "training steps")->each([&a](const std::string&) { a.has_steps = true; });
  cmd->add_option("--seed", a.seed, "random seed")->each([&a](const std::string&) { a.has_seed = true; });
}

/// File values, then --set overrides, then dedicated flags; prints the result.
TrainConfig resolve_config(const ConfigArgs& a) {
  TrainConfig cfg = a.config_file.empty() ? TrainConfig{} : TrainConfig::load(a.config_file);
  for (const auto& s : a.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + s + "'");
    cfg.set(detail::trim(s.substr(0, eq)), s.substr(eq + 1));
  }
  if (!a.dataset.empty()) cfg.dataset = a.dataset;
  if (!a.data_dir.empty()) cfg.data_dir = a.data_dir;
  if (!a.out_dir.empty()) cfg.out_dir = a.out_dir;
  if (a.has_steps) cfg.steps = a.steps;
  if (a.has_seed) cfg.seed = a.seed;
  if (cfg.data_dir.empty()) {
    if (const char* env = std::getenv("ADGAN_DATA_DIR")) cfg.data_dir = env;
  }
  cfg.validate();
  std::cout << "# resolved configuration\n" << cfg.serialize() << std::endl;
  return cfg;
}

std::vector<std::string> list_images(const std::string& input) {
  if (!fs::exists(input)) throw IoError("input not found: " + input);
  if (!fs::is_directory(input)) return {input};
  std::vector<std::string> out;
  for (const auto& e : fs::directory_iterator(input)) {
    auto ext = e.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (e.is_regular_file() && (ext == ".png" || ext == ".jpg" || ext == ".jpeg")) out.push_back(e.path().string());
  }
  std::sort(out.begin(), out.end());
  if (out.empty()) throw IoError("no images in " + input);
  return out;
}

std::vector<double> parse_values(const std::string& text) {
  std::vector<double> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto comma = text.find(',', pos);
    out.push_back(detail::parse_number<double>("attribute value",
                                               text.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos)));
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return out;
}

// ---------------------------------------------------------------------------

int cmd_synthgen(const std::string& out, std::size_t count, std::size_t attrs, std::size_t size, std::uint64_t seed) {
  const fs::path root(out), images = root / "img_align_celeba";
  fs::create_directories(images);
  const auto examples = gen_synthetic(count, attrs, size, seed);
  AttrTable table;
  table.count = count;
  for (std::size_t i = 0; i < attrs; ++i) table.columns.emplace_back(synthetic::kColumns[i]);
  for (std::size_t i = 0; i < count; ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "%06zu.png", i);
    save_image((images / name).string(), examples[i].image);
    AttrRow row{name, {}};
    for (std::size_t k = 0; k < attrs; ++k) row.values.push_back(examples[i].attrs[k] == 1.0 ? 1 : 0);
    table.rows.push_back(std::move(row));
  }
  write_attr_file((root / "list_attr_celeba.txt").string(), table);
  std::cout << "wrote " << count << " images and " << (root / "list_attr_celeba.txt").string() << '\n';
  return kOk;
}

int cmd_train(const ConfigArgs& args, const std::string& resume) {
  const auto cfg = resolve_config(args);
  const auto data = build_datasets(cfg);
  TrainOptions opts;
  opts.progress = &std::cout;
  if (!resume.empty()) opts.resume = Checkpoint::load(resume);
  const auto result = train(cfg, data, opts);
  std::cout << "final checkpoint: " << (fs::path(cfg.out_dir) / "final.adgn").string() << '\n';
  (void)result;
  return kOk;
}

int cmd_train_classifier(const ConfigArgs& args, std::size_t steps, const std::string& out) {
  const auto cfg = resolve_config(args);
  const auto data = build_datasets(cfg);
  ClassifierConfig cc;
  cc.model = cfg.model;
  cc.steps = steps;
  cc.batch_size = cfg.batch_size;
  cc.seed = mix_seed(cfg.seed, 17);
  const auto result = train_attr_classifier(data.train, data.test, cc);
  for (std::size_t k = 0; k < result.test_accuracy.size(); ++k) {
    std::cout << data.test.schema()->names[k] << " held-out accuracy " << format_double(result.test_accuracy[k])
              << '\n';
  }
  classifier_checkpoint(result.classifier).save(out);
  std::cout << "classifier: " << out << '\n';
  return kOk;
}

struct EditArgs {
  std::string checkpoint, input, flip, soft, attrs, attr_file, out;
  bool all = false;
};

int cmd_edit(const EditArgs& a) {
  const auto ck = Checkpoint::load(a.checkpoint);
  const auto params = params_from_checkpoint(ck);
  const auto& schema = params.schema;
  const auto paths = list_images(a.input);
  const std::size_t size = params.config.image_size;
  const int modes = !a.flip.empty() + a.all + !a.soft.empty();
  if (modes != 1) throw ConfigError("edit needs exactly one of --flip, --all, --soft");

  if (!a.soft.empty()) {
    const auto c = parse_values(a.soft);
    fs::create_directories(a.out);
    for (const auto& p : paths) {
      const auto out = soft_edit(params, load_image(p, size), c);
      const auto dest = fs::path(a.out) / (fs::path(p).stem().string() + "_soft.png");
      save_image(dest.string(), out);
      std::cout << dest.string() << '\n';
    }
    return kOk;
  }

  // the inputs' own attributes
  std::vector<AttributeVector> own;
  if (!a.attr_file.empty()) {
    const auto table = parse_attr_file(a.attr_file);
    for (const auto& p : paths) {
      const auto name = fs::path(p).filename().string();
      auto it = std::find_if(table.rows.begin(), table.rows.end(), [&](const AttrRow& r) { return r.filename == name; });
      if (it == table.rows.end()) throw ContractError("no attributes for " + name + " in " + a.attr_file);
      own.push_back(row_attributes(table, *it, schema));
    }
  } else if (!a.attrs.empty()) {
    const AttributeVector v(schema, parse_values(a.attrs));
    if (!v.is_binary()) throw ContractError("--attrs must be binary");
    own.assign(paths.size(), v);
  } else {
    throw ConfigError("--flip and --all need the inputs' attributes: pass --attrs or --attr-file");
  }

  std::vector<Example> inputs;
  for (std::size_t i = 0; i < paths.size(); ++i) inputs.push_back({load_image(paths[i], size), own[i], paths[i]});

  if (a.all) {
    const auto layout = render_grid(params, inputs, a.out);
    std::cout << a.out << ": " << layout.rows << " rows x " << layout.cols << " columns, " << layout.width << "x"
              << layout.height << " pixels\n";
    return kOk;
  }
  const std::size_t index = schema->index_of(a.flip);
  fs::create_directories(a.out);
  const Batch batch = stack_examples(inputs);
  AttributeBatch targets;
  for (const auto& v : batch.attrs) targets.push_back(flip_single(v, index));
  const auto edited = generator_editor(params)(batch.images, targets);
  const std::size_t per = 3 * size * size;
  for (std::size_t i = 0; i < paths.size(); ++i) {
    const Tensor<float> img({3, size, size},
                            std::vector<float>(edited.data().begin() + i * per, edited.data().begin() + (i + 1) * per));
    const auto dest = fs::path(a.out) / (fs::path(paths[i]).stem().string() + "_" + schema->names[index] + ".png");
    save_image(dest.string(), img);
    std::cout << dest.string() << '\n';
  }
  return kOk;
}

int cmd_eval(const std::string& checkpoint, const std::string& classifier, const std::string& data_dir,
             const std::string& out) {
  const auto ck = Checkpoint::load(checkpoint);
  auto cfg = TrainConfig::parse(ck.config);
  if (!data_dir.empty()) {
    cfg.dataset = "celeba";
    cfg.data_dir = data_dir;
    cfg.attr_file.clear();
    cfg.image_dir.clear();
  }
  const auto params = params_from_checkpoint(ck);
  const auto clf = classifier_from_checkpoint(Checkpoint::load(classifier));
  detail::require_schema(params.schema, clf.schema, "eval: generator and classifier");
  const auto data = build_datasets(cfg);
  const auto report = evaluate_editor(generator_editor(params), clf, data.test);
  report.print(std::cout);
  std::ofstream file(out);
  if (!file) throw IoError("cannot write " + out);
  file << report.csv_header() << '\n' << report.csv_row() << '\n';
  std::cout << "report: " << out << '\n';
  return kOk;
}

int cmd_gradcheck(double tolerance) {
  const auto results = run_gradcheck_suite(tolerance);
  bool ok = true;
  for (const auto& r : results) {
    std::cout << (r.report.passed() ? "ok    " : "FAIL  ") << std::left << std::setw(34) << r.name
              << " max relative error " << r.report.worst() << '\n';
    ok = ok && r.report.passed();
  }
  std::cout << (ok ? "all " : "some ") << results.size() << " checks " << (ok ? "passed" : "failed")
            << " at tolerance " << tolerance << '\n';
  return ok ? kOk : kNumeric;
}

int cmd_schema(const std::string& checkpoint) {
  const AttributeSchema schema = checkpoint.empty() ? AttributeSchema::celeba_default()
                                                    : AttributeSchema::parse(Checkpoint::load(checkpoint).schema);
  for (std::size_t i = 0; i < schema.size(); ++i) {
    std::cout << i << '\t' << schema.names[i] << '\t' << schema.columns[i] << '\n';
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"attribute-dependent face editing GAN"};
  app.require_subcommand(1);

  std::string s_out;
  std::size_t s_count = 100, s_attrs = 3, s_size = 32;
  std::uint64_t s_seed = 7;
  auto* synthgen = app.add_subcommand("synthgen", "write a synthetic dataset (PNGs + attribute file)");
  synthgen->add_option("--out", s_out, "output directory")->required();
  synthgen->add_option("--count", s_count, "number of images");
  synthgen->add_option("--attrs", s_attrs, "number of attributes (1-8)");
  synthgen->add_option("--size", s_size, "image side in pixels");
  synthgen->add_option("--seed", s_seed, "random seed");

  ConfigArgs train_args;
  std::string resume;
  auto* train_cmd = app.add_subcommand("train", "train the networks");
  add_config_flags(train_cmd, train_args);
  train_cmd->add_option("--resume", resume, "checkpoint to continue from");

  ConfigArgs clf_args;
  std::size_t clf_steps = 2000;
  std::string clf_out = "classifier.adgn";
  auto* clf_cmd = app.add_subcommand("train-classifier", "train the independent attribute classifier");
  add_config_flags(clf_cmd, clf_args);
  clf_cmd->add_option("--classifier-steps", clf_steps, "classifier training steps");
  clf_cmd->add_option("--out", clf_out, "classifier checkpoint path");

  EditArgs edit_args;
  auto* edit = app.add_subcommand("edit", "edit images with a trained checkpoint");
  edit->add_option("--checkpoint", edit_args.checkpoint)->required();
  edit->add_option("--input", edit_args.input, "image file or directory")->required();
  edit->add_option("--flip", edit_args.flip, "attribute name or column to invert");
  edit->add_flag("--all", edit_args.all, "write a grid: input, reconstruction, every single flip");
  edit->add_option("--soft", edit_args.soft, "comma-separated soft attribute vector in [0,1]");
  edit->add_option("--attrs", edit_args.attrs, "comma-separated binary attributes of the inputs");
  edit->add_option("--attr-file", edit_args.attr_file, "attribute file listing the inputs");
  edit->add_option("--out", edit_args.out, "output directory (grid: PNG path)")->required();

  std::string e_ckpt, e_clf, e_data, e_out = "eval.csv";
  auto* eval = app.add_subcommand("eval", "score single-attribute edits with the classifier");
  eval->add_option("--checkpoint", e_ckpt)->required();
  eval->add_option("--classifier", e_clf)->required();
  eval->add_option("--data", e_data, "CelebA-layout directory (default: the checkpoint's dataset)");
  eval->add_option("--out", e_out, "report CSV path");

  double tolerance = 1e-5;
  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference check of every op and loss (64-bit)");
  gradcheck->add_flag("--micro-config", "use the 4x4, 2-attribute micro-config (always on)");
  gradcheck->add_option("--tolerance", tolerance, "max relative error");

  std::string sc_ckpt;
  auto* schema = app.add_subcommand("schema", "print the attribute schema");
  schema->add_option("--checkpoint", sc_ckpt, "read the schema from a checkpoint");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    if (*synthgen) return cmd_synthgen(s_out, s_count, s_attrs, s_size, s_seed);
    if (*train_cmd) return cmd_train(train_args, resume);
    if (*clf_cmd) return cmd_train_classifier(clf_args, clf_steps, clf_out);
    if (*edit) return cmd_edit(edit_args);
    if (*eval) return cmd_eval(e_ckpt, e_clf, e_data, e_out);
    if (*gradcheck) return cmd_gradcheck(tolerance);
    if (*schema) return cmd_schema(sc_ckpt);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const IoError& e) {
    std::cerr << "I/O error: " << e.what() << '\n';
    return kIo;
  } catch (const NumericError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kNumeric;
  } catch (const FormatError& e) {
    std::cerr << "format error: " << e.what() << '\n';
    return kFormat;
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << '\n';
    return kFormat;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kContract;
  } catch (const std::exception& e) {
    std::cerr << "unexpected failure: " << e.what() << '\n';
    return kOther;
  }
  return kOther;
}
