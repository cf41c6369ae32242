// emprox: command-line front end.
//
//   emprox gen-synthetic --n 1000 --seed 7 --out bench.csv
//   emprox convert-nb201 --in export.csv --column cifar10_valid --dataset cifar10 --out bench.csv
//   emprox fit       --bench bench.csv --k 10 --d 32 --out predictor.json
//   emprox query     --model predictor.json --arch '|nor_conv_3x3~0|+|...|'
//   emprox eval      --bench bench.csv --k 10 --d 32 --trials 20 --seed 1 [--jobs N] [--out r.json --out r.csv]
//   emprox gridsearch --bench bench.csv --k 3,10,60 --d 16,32,64,128 --trials 20
//   emprox embed     --bench bench.csv --n-train 121 --n-extra 100 --out embeddings.csv
//
// Exit status: 0 success, 1 runtime failure, 2 usage error.

#include <cstdint>
#include <algorithm>
#include <charconv>
#include <filesystem>
#include <map>
#include <optional>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "emprox/archspace.hpp"
#include "emprox/benchdata.hpp"
#include "emprox/errors.hpp"
#include "emprox/harness.hpp"
#include "emprox/predictor.hpp"

namespace {

using namespace emprox;

constexpr std::uint64_t kDefaultSeed = 1;

struct ModelFlags {
  std::size_t k = 10;
  std::size_t d = 32;
  int epochs = 200;
  double lr = ModelConfig{}.learning_rate;
};

void add_model_flags(CLI::App* sub, ModelFlags& f, bool with_k_d = true) {
  if (with_k_d) {
    sub->add_option("--k", f.k, "Number of neighbours")->check(CLI::PositiveNumber)->capture_default_str();
    sub->add_option("--d", f.d, "Embedding (hidden) dimension")->check(CLI::PositiveNumber)->capture_default_str();
  }
  sub->add_option("--epochs", f.epochs, "Autoencoder training epochs")->check(CLI::PositiveNumber)->capture_default_str();
  sub->add_option("--lr", f.lr, "Adam learning rate")->check(CLI::PositiveNumber)->capture_default_str();
}

PredictorConfig predictor_config(const ModelFlags& f, std::uint64_t seed) {
  PredictorConfig cfg;
  cfg.k = f.k;
  cfg.model.hidden_dim = f.d;
  cfg.model.epochs = f.epochs;
  cfg.model.learning_rate = f.lr;
  cfg.model.seed = seed;
  return cfg;
}

enum class OutFormat { Auto, Json, Csv };

bool wants_json(const std::filesystem::path& path, OutFormat f) {
  if (f == OutFormat::Json) return true;
  if (f == OutFormat::Csv) return false;
  return path.extension() == ".json";
}

// "3,10,60" -> {3, 10, 60}; nullopt for empty items, signs, zeros or junk.
std::optional<std::vector<std::size_t>> parse_positive_list(const std::string& text) {
  std::vector<std::size_t> out;
  std::size_t pos = 0;
  for (;;) {
    const std::size_t comma = std::min(text.find(',', pos), text.size());
    std::size_t value = 0;
    const auto [ptr, ec] = std::from_chars(text.data() + pos, text.data() + comma, value);
    if (ec != std::errc() || ptr != text.data() + comma || comma == pos || value == 0) return std::nullopt;
    out.push_back(value);
    if (comma == text.size()) return out;
    pos = comma + 1;
  }
}

void print_trials(const EvalReport& r) {
  for (std::size_t i = 0; i < r.trials.size(); ++i) {
    const auto& t = r.trials[i];
    if (t.report) {
      std::cerr << r.label << " trial " << i << " seed " << t.seed << ": MAE " << t.report->mae << " Spearman "
                << t.report->spearman << " fit " << t.report->fit_time_s << "s\n";
    } else {
      std::cerr << r.label << " trial " << i << " seed " << t.seed << ": skipped (" << t.skip_reason << ")\n";
    }
    for (const auto& w : t.warnings) std::cerr << "warning: " << w << '\n';
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Embedding-proximity accuracy predictor for cell architectures"};
  app.require_subcommand(1);

  std::uint64_t seed = kDefaultSeed;
  std::vector<std::filesystem::path> outs;
  OutFormat format = OutFormat::Auto;
  const std::map<std::string, OutFormat> format_map{{"json", OutFormat::Json}, {"csv", OutFormat::Csv}};
  std::filesystem::path bench;
  ModelFlags mf;
  std::size_t jobs = 1;

  // gen-synthetic
  auto* gen = app.add_subcommand("gen-synthetic", "Write a synthetic benchmark table");
  SyntheticSpec syn;
  gen->add_option("--n", syn.n, "Number of architectures")->required()->check(CLI::PositiveNumber);
  gen->add_option("--noise-sd", syn.noise_sd, "Gaussian noise on accuracies")->check(CLI::NonNegativeNumber)->capture_default_str();
  gen->add_option("--nodes", syn.num_nodes, "Cell nodes")->check(CLI::Range(2, 16))->capture_default_str();
  gen->add_option("--seed", seed, "Random seed")->capture_default_str();
  gen->add_option("--out", outs, "Output file (.csv or .json)")->required()->expected(1);
  gen->add_option("--format", format, "Output format")->transform(CLI::CheckedTransformer(format_map, CLI::ignore_case));

  // convert-nb201
  auto* conv = app.add_subcommand("convert-nb201", "Convert an exported NAS-Bench-201 CSV listing");
  std::filesystem::path conv_in;
  std::string column = "cifar10_valid";
  std::string dataset = "cifar10";
  conv->add_option("--in", conv_in, "Export CSV with an 'arch' column")->required()->check(CLI::ExistingFile);
  conv->add_option("--column", column, "Accuracy column to read")->capture_default_str();
  conv->add_option("--dataset", dataset, "Dataset tag for the rows")->capture_default_str();
  conv->add_option("--out", outs, "Output benchmark file")->required()->expected(1);

  // fit
  auto* fit = app.add_subcommand("fit", "Fit a predictor on every row of a benchmark table");
  fit->add_option("--bench", bench, "Benchmark table")->required()->check(CLI::ExistingFile);
  add_model_flags(fit, mf);
  fit->add_option("--seed", seed, "Random seed")->capture_default_str();
  fit->add_option("--out", outs, "Predictor file (.json)")->required()->expected(1);

  // query
  auto* query = app.add_subcommand("query", "Estimate accuracies with a fitted predictor");
  std::filesystem::path model_path;
  std::vector<std::string> archs;
  query->add_option("--model", model_path, "Predictor file")->required()->check(CLI::ExistingFile);
  query->add_option("--arch", archs, "Cell string (repeatable)")->required();

  // eval
  auto* eval = app.add_subcommand("eval", "Repeated 121/100 train/test evaluation");
  std::size_t trials = 20, n_train = 121, n_test = 100;
  eval->add_option("--bench", bench, "Benchmark table")->required()->check(CLI::ExistingFile);
  add_model_flags(eval, mf);
  eval->add_option("--trials", trials, "Number of trials")->check(CLI::PositiveNumber)->capture_default_str();
  eval->add_option("--n-train", n_train, "Training architectures per trial")->check(CLI::PositiveNumber)->capture_default_str();
  eval->add_option("--n-test", n_test, "Test architectures per trial")->check(CLI::PositiveNumber)->capture_default_str();
  eval->add_option("--seed", seed, "Base seed")->capture_default_str();
  eval->add_option("--jobs", jobs, "Parallel trials")->check(CLI::PositiveNumber)->capture_default_str();
  eval->add_option("--out", outs, "Report file(s): .json full detail, .csv summary");
  eval->add_option("--format", format, "Format for --out")->transform(CLI::CheckedTransformer(format_map, CLI::ignore_case));

  // gridsearch
  auto* grid = app.add_subcommand("gridsearch", "Evaluate every (k, d) combination");
  std::string k_list = "3,10,60", d_list = "16,32,64,128";
  const CLI::Validator positive_list(
      [](std::string& text) -> std::string {
        return parse_positive_list(text) ? std::string() : "'" + text + "' is not a comma-separated list of positive integers";
      },
      "LIST");
  grid->add_option("--bench", bench, "Benchmark table")->required()->check(CLI::ExistingFile);
  grid->add_option("--k", k_list, "Comma-separated k values")->check(positive_list)->capture_default_str();
  grid->add_option("--d", d_list, "Comma-separated d values")->check(positive_list)->capture_default_str();
  add_model_flags(grid, mf, false);
  grid->add_option("--trials", trials, "Trials per cell")->check(CLI::PositiveNumber)->capture_default_str();
  grid->add_option("--n-train", n_train, "Training architectures per trial")->check(CLI::PositiveNumber)->capture_default_str();
  grid->add_option("--n-test", n_test, "Test architectures per trial")->check(CLI::PositiveNumber)->capture_default_str();
  grid->add_option("--seed", seed, "Base seed")->capture_default_str();
  grid->add_option("--jobs", jobs, "Parallel trials")->check(CLI::PositiveNumber)->capture_default_str();
  grid->add_option("--out", outs, "Report file(s): .json or .csv");
  grid->add_option("--format", format, "Format for --out")->transform(CLI::CheckedTransformer(format_map, CLI::ignore_case));

  // embed
  auto* embed = app.add_subcommand("embed", "Export learned embeddings for plotting");
  std::size_t n_extra = 100;
  embed->add_option("--bench", bench, "Benchmark table")->required()->check(CLI::ExistingFile);
  add_model_flags(embed, mf);
  embed->add_option("--n-train", n_train, "Architectures the predictor is fitted on")->check(CLI::PositiveNumber)->capture_default_str();
  embed->add_option("--n-extra", n_extra, "Additional held-out architectures to embed")->check(CLI::NonNegativeNumber)->capture_default_str();
  embed->add_option("--seed", seed, "Random seed")->capture_default_str();
  embed->add_option("--out", outs, "Output CSV")->required()->expected(1);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (gen->parsed()) {
      syn.seed = seed;
      const auto table = generate_synthetic(OperationVocabulary::nb201(), syn);
      const auto& out = outs.front();
      save_benchmark(table, out, wants_json(out, format) ? BenchFormat::Json : BenchFormat::Csv);
      std::cout << "wrote " << table.size() << " architectures to " << out.string() << '\n';
    } else if (conv->parsed()) {
      const auto table = convert_nb201_export(read_file(conv_in), column, dataset);
      save_benchmark(table, outs.front(), format_for(outs.front()));
      std::cout << "wrote " << table.size() << " architectures to " << outs.front().string() << '\n';
    } else if (fit->parsed()) {
      const auto table = load_benchmark(bench, format_for(bench));
      const auto p = Predictor::fit(table.records, predictor_config(mf, seed));
      for (const auto& w : p.warnings()) std::cerr << "warning: " << w << '\n';
      p.save(outs.front());
      std::cout << "fitted on " << p.corpus_size() << " architectures in " << p.fit_seconds() << " s\n";
    } else if (query->parsed()) {
      const auto p = Predictor::load(model_path);
      for (const auto& s : archs) {
        const auto r = p.query(parse_arch_string(s, p.vocabulary()));
        if (r.warning) std::cerr << "warning: " << *r.warning << '\n';
        std::cout << s << ',' << r.accuracy << '\n';
      }
    } else if (eval->parsed()) {
      const auto table = load_benchmark(bench, format_for(bench));
      TrialSpec spec;
      spec.benchmark = &table;
      spec.n_train = n_train;
      spec.n_test = n_test;
      spec.predictor = predictor_config(mf, seed);
      const EvalReport report = run_experiment(spec, trials, seed, jobs);
      print_trials(report);
      const EvalReport reports[] = {report};
      std::cout << format_table(reports);
      for (const auto& out : outs) {
        write_file(out, wants_json(out, format) ? report_to_json(reports) : report_to_csv(reports));
      }
    } else if (grid->parsed()) {
      const auto table = load_benchmark(bench, format_for(bench));
      TrialSpec spec;
      spec.benchmark = &table;
      spec.n_train = n_train;
      spec.n_test = n_test;
      spec.predictor = predictor_config(mf, seed);
      const auto cells = grid_search(*parse_positive_list(k_list), *parse_positive_list(d_list), spec, trials, seed, jobs);
      std::vector<EvalReport> ok;
      for (const auto& c : cells) {
        if (c.report) {
          print_trials(*c.report);
          ok.push_back(*c.report);
        } else {
          std::cerr << "k=" << c.k << " d=" << c.d << " failed: " << c.error << '\n';
        }
      }
      std::cout << format_table(ok);
      for (const auto& out : outs) {
        write_file(out, wants_json(out, format) ? grid_to_json(cells) : grid_to_csv(cells));
      }
    } else if (embed->parsed()) {
      const auto table = load_benchmark(bench, format_for(bench));
      const Split split = sample_split(table, n_train, std::min(n_extra, table.size() - std::min(n_train, table.size())), seed);
      const auto p = Predictor::fit(split.train, predictor_config(mf, seed));
      for (const auto& w : p.warnings()) std::cerr << "warning: " << w << '\n';
      const auto rows = dump_embeddings(p, split.test);
      write_file(outs.front(), embeddings_to_csv(rows));
      std::cout << "wrote " << rows.size() << " embeddings to " << outs.front().string() << '\n';
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
