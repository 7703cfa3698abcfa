// Command-line front end: faulty products, characterization sweeps,
// mitigated inference, fine tuning, BER queries and baseline training.

#include <CLI11.hpp>
#include <json.hpp>

#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>

#include "fltlab/faft.hpp"
#include "fltlab/floatbits.hpp"
#include "fltlab/mitigation.hpp"
#include "fltlab/model_io.hpp"
#include "fltlab/parallel.hpp"
#include "fltlab/sweep.hpp"
#include "fltlab/systolic.hpp"

namespace {

using namespace fltlab;
using nlohmann::json;

struct Global {
  std::uint64_t seed = 1;
  int jobs = 1;
  std::string format = "f32";
  int dim = 8;
};

struct FaultArgs {
  std::string kind;
  int pe_row = 0;
  int pe_col = 0;
  int bit = -1;
  int stuck = 0;

  std::optional<FaultSite> site() const {
    if (kind.empty() || kind == "none") return std::nullopt;
    if (bit < 0) throw std::invalid_argument("--bit is required with --kind");
    return FaultSite{parse_fault_kind(kind), pe_row, pe_col, {bit, stuck}};
  }

  FaultSite required() const {
    auto s = site();
    if (!s) throw std::invalid_argument("--kind is required for this command");
    return *s;
  }
};

void add_fault_options(CLI::App* cmd, FaultArgs& f) {
  cmd->add_option("--kind", f.kind, "Fault kind: right_link, down_link, weight_register or none");
  cmd->add_option("--pe-row", f.pe_row, "PE row x of the fault")->check(CLI::NonNegativeNumber);
  cmd->add_option("--pe-col", f.pe_col, "PE column y of the fault")->check(CLI::NonNegativeNumber);
  cmd->add_option("--bit", f.bit, "Stuck bit position (0 is the mantissa LSB)");
  cmd->add_option("--stuck", f.stuck, "Stuck value")->check(CLI::IsMember({0, 1}));
}

Matrix random_matrix(Index rows, Index cols, std::mt19937_64& rng, const FloatFormat& fmt) {
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  Matrix m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = round_to_format(dist(rng), fmt);
  return m;
}

double normwise_relative_error(const Matrix& got, const Matrix& want) {
  const double scale = want.cwiseAbs().maxCoeff();
  const double err = (got - want).cwiseAbs().maxCoeff();
  return scale == 0.0 ? err : err / scale;
}

void print(const json& j) { std::cout << j.dump(2) << '\n'; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Weight-stationary systolic array simulator with stuck-at fault injection and mitigation"};
  app.set_config("--config", "", "TOML/INI config file; command-line flags override it");
  app.require_subcommand(1);
  app.fallthrough();

  Global g;
  app.add_option("--seed", g.seed, "Random seed");
  app.add_option("--jobs", g.jobs, "Worker threads (0 = hardware threads)")->check(CLI::NonNegativeNumber);
  app.add_option("--format", g.format, "Simulated format")->check(CLI::IsMember({"f32", "f16", "bf16"}));
  app.add_option("--dim", g.dim, "Systolic array dimension d")->check(CLI::PositiveNumber);

  // matmul
  auto* matmul = app.add_subcommand("matmul", "One faulty tiled product of random matrices against the oracle");
  Index mm_rows = 64, mm_inner = 64, mm_cols = 64;
  FaultArgs mm_fault;
  matmul->add_option("--rows", mm_rows)->check(CLI::PositiveNumber);
  matmul->add_option("--inner", mm_inner)->check(CLI::PositiveNumber);
  matmul->add_option("--cols", mm_cols)->check(CLI::PositiveNumber);
  add_fault_options(matmul, mm_fault);

  // sweep
  auto* sweep = app.add_subcommand("sweep", "Accuracy over fault kinds, bits, stuck values and PEs");
  std::string sw_model, sw_data = "data/mnist", sw_kinds = "right_link,down_link,weight_register", sw_bits;
  std::string sw_stuck = "0,1", sw_out, sw_report_format = "csv";
  int sw_stride = 1;
  Index sw_samples = 0;
  bool sw_mitigate = false;
  sweep->add_option("--model", sw_model, "FLTLAB01 model file")->required();
  sweep->add_option("--data-dir", sw_data, "Directory with the test IDX pair");
  sweep->add_option("--kinds", sw_kinds, "Comma-separated fault kinds");
  sweep->add_option("--bits", sw_bits, "Bit positions, e.g. 0-3,22,30")->required();
  sweep->add_option("--stuck", sw_stuck, "Stuck values, e.g. 0,1");
  sweep->add_option("--stride", sw_stride, "PE sampling stride over the d*d PEs")->check(CLI::PositiveNumber);
  sweep->add_option("--samples", sw_samples, "Test samples to use (0 = all)")->check(CLI::NonNegativeNumber);
  sweep->add_flag("--mitigate", sw_mitigate, "Also run the selected scaling or tile technique");
  sweep->add_option("--out", sw_out, "Report path (default: stdout)");
  sweep->add_option("--report-format", sw_report_format)->check(CLI::IsMember({"csv", "json"}));

  // mitigate
  auto* mitigate = app.add_subcommand("mitigate", "Baseline, faulty and mitigated accuracy for one fault");
  std::string mt_model, mt_data = "data/mnist";
  Index mt_samples = 0;
  FaultArgs mt_fault;
  mitigate->add_option("--model", mt_model)->required();
  mitigate->add_option("--data-dir", mt_data);
  mitigate->add_option("--samples", mt_samples)->check(CLI::NonNegativeNumber);
  add_fault_options(mitigate, mt_fault);

  // faft
  auto* faftc = app.add_subcommand("faft", "Fault-aware fine tuning for a high-mantissa fault");
  std::string ft_model, ft_data = "data/mnist", ft_out;
  Index ft_holdout = 1000;
  TrainConfig ft_cfg;
  FaultArgs ft_fault;
  faftc->add_option("--model", ft_model)->required();
  faftc->add_option("--data-dir", ft_data);
  faftc->add_option("--out", ft_out, "Where to save the tuned model");
  faftc->add_option("--holdout", ft_holdout, "Training rows held out for early stopping")
      ->check(CLI::PositiveNumber);
  faftc->add_option("--lr", ft_cfg.learning_rate);
  faftc->add_option("--batch", ft_cfg.batch_size);
  faftc->add_option("--epochs", ft_cfg.max_epochs);
  faftc->add_option("--patience", ft_cfg.early_stop_patience);
  faftc->add_option("--subset", ft_cfg.subset_size);
  add_fault_options(faftc, ft_fault);

  // ber
  auto* ber = app.add_subcommand("ber", "Maximum mitigated bit error rate");
  std::string ber_class = "single", ber_site = "link";
  bool ber_table = false;
  ber->add_option("--class", ber_class, "single, FC1, FC2 or FC3");
  ber->add_option("--site", ber_site, "link or weight_register");
  ber->add_flag("--table", ber_table, "Print every class, site, d in {8,64,128,256} and format as CSV");

  // train
  auto* train = app.add_subcommand("train", "Fault-free baseline training of the 784-128-64-10 network");
  std::string tr_data = "data/mnist", tr_out = "model.fltlab";
  TrainConfig tr_cfg;
  tr_cfg.max_epochs = 15;
  train->add_option("--data-dir", tr_data);
  train->add_option("--out", tr_out);
  train->add_option("--lr", tr_cfg.learning_rate);
  train->add_option("--batch", tr_cfg.batch_size);
  train->add_option("--epochs", tr_cfg.max_epochs);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: usage: " << e.what() << '\n';
    return e.get_exit_code() ? e.get_exit_code() : 2;
  }

  try {
    const FloatFormat& fmt = parse_format(g.format);
    const int jobs = resolve_jobs(g.jobs);
    const int d = g.dim;

    if (matmul->parsed()) {
      std::mt19937_64 rng(g.seed);
      const Matrix a = random_matrix(mm_rows, mm_inner, rng, fmt);
      const Matrix w = random_matrix(mm_inner, mm_cols, rng, fmt);
      const auto fault = mm_fault.site();
      const Matrix ref = reference_mm(a, w, fmt);
      const Matrix clean = tiled_mm(a, w, d, std::nullopt, 0.0, fmt);
      const Matrix faulty = tiled_mm(a, w, d, fault, 0.0, fmt);
      Index changed = 0;
      for (Index i = 0; i < faulty.size(); ++i) {
        const double x = faulty.data()[i], y = clean.data()[i];
        changed += !(x == y || (std::isnan(x) && std::isnan(y)));
      }
      print({{"format", to_string(fmt.name)},
             {"dim", d},
             {"fault_free_relative_error", normwise_relative_error(clean, ref)},
             {"faulty_relative_error", normwise_relative_error(faulty, ref)},
             {"elements_changed_by_fault", changed},
             {"elements", faulty.size()}});
    } else if (sweep->parsed()) {
      SweepConfig cfg;
      cfg.format = fmt;
      cfg.tile_dim = d;
      cfg.kinds.clear();
      std::stringstream ks(sw_kinds);
      for (std::string k; std::getline(ks, k, ',');) cfg.kinds.push_back(parse_fault_kind(k));
      cfg.bits = parse_bit_list(sw_bits);
      cfg.stuck_values = parse_bit_list(sw_stuck);
      cfg.pe_stride = sw_stride;
      cfg.sample_limit = sw_samples;
      cfg.mitigate = sw_mitigate;
      cfg.seed = g.seed;
      cfg.jobs = jobs;
      const std::filesystem::path dir(sw_data);
      const SweepReport report =
          run_sweep(cfg, sw_model, dir / "test-images-idx3-ubyte", dir / "test-labels-idx1-ubyte");
      const ReportFormat rf = parse_report_format(sw_report_format);
      if (sw_out.empty()) {
        write_report(std::cout, report, rf);
      } else {
        emit_report(report, rf, sw_out);
        std::cerr << "baseline accuracy " << format_number(report.baseline_accuracy) << ", " << report.rows.size()
                  << " rows written to " << sw_out << '\n';
      }
    } else if (mitigate->parsed()) {
      const FcnModel model = load_model(mt_model);
      Dataset test = load_mnist_split(mt_data, "test");
      if (mt_samples > 0) test = test.head(mt_samples);
      const FaultSite fault = mt_fault.required();
      validate(fault, d, fmt);
      const MitigationChoice choice = select_mitigation(fmt, fault);
      json out{{"technique", to_string(choice)},
               {"baseline_accuracy", evaluate(model, test, std::nullopt, std::nullopt, d, fmt, jobs)},
               {"faulty_accuracy", evaluate(model, test, fault, std::nullopt, d, fmt, jobs)}};
      if (choice == MitigationChoice::IScSh || choice == MitigationChoice::ISc ||
          choice == MitigationChoice::ETOps) {
        out["mitigated_accuracy"] = evaluate(model, test, fault, choice, d, fmt, jobs);
      }
      print(out);
    } else if (faftc->parsed()) {
      ft_cfg.seed = g.seed;
      const FcnModel model = load_model(ft_model);
      const Dataset train_all = load_mnist_split(ft_data, "train");
      const Dataset test = load_mnist_split(ft_data, "test");
      if (ft_holdout >= train_all.size()) throw std::domain_error("--holdout leaves no training rows");
      const Index n_train = train_all.size() - ft_holdout;
      std::vector<Index> tail(static_cast<std::size_t>(ft_holdout));
      for (Index i = 0; i < ft_holdout; ++i) tail[static_cast<std::size_t>(i)] = n_train + i;
      const FaultSite fault = ft_fault.required();
      const FaftResult r =
          faft(model, train_all.head(n_train), train_all.subset(tail), fault, d, fmt, ft_cfg, jobs);
      if (!ft_out.empty()) save_model(ft_out, r.model);
      print({{"test_accuracy_fault_free", evaluate(model, test, std::nullopt, std::nullopt, d, fmt, jobs)},
             {"test_accuracy_faulty_before", evaluate(model, test, fault, std::nullopt, d, fmt, jobs)},
             {"test_accuracy_faulty_after", evaluate(r.model, test, fault, std::nullopt, d, fmt, jobs)},
             {"holdout_accuracy_before", r.initial_accuracy},
             {"holdout_accuracy_after", r.best_accuracy},
             {"epochs_run", r.epochs_run},
             {"best_epoch", r.best_epoch}});
    } else if (ber->parsed()) {
      if (ber_table) {
        std::cout << "class,site,dim,format,max_mitigated_ber,quoted\n";
        for (FcClass c : {FcClass::Single, FcClass::FC1, FcClass::FC2, FcClass::FC3}) {
          for (BerSite s : {BerSite::Link, BerSite::WeightRegister}) {
            for (int dd : {8, 64, 128, 256}) {
              for (const FloatFormat* f : {&kFloat16, &kBFloat16, &kFloat32}) {
                std::cout << to_string(c) << ',' << to_string(s) << ',' << dd << ',' << to_string(f->name) << ','
                          << format_number(max_mitigated_ber(c, s, dd, *f)) << ','
                          << format_number(quoted_max_mitigated_ber(c, s, dd, *f)) << '\n';
              }
            }
          }
        }
      } else {
        const FcClass c = ber_class == "single" ? FcClass::Single : parse_fc_class(ber_class);
        const BerSite s = parse_ber_site(ber_site);
        print({{"class", to_string(c)},
               {"site", to_string(s)},
               {"dim", d},
               {"format", to_string(fmt.name)},
               {"max_mitigated_ber", max_mitigated_ber(c, s, d, fmt)},
               {"quoted", quoted_max_mitigated_ber(c, s, d, fmt)}});
      }
    } else if (train->parsed()) {
      tr_cfg.seed = g.seed;
      const Dataset train_set = load_mnist_split(tr_data, "train");
      const Dataset test = load_mnist_split(tr_data, "test");
      const FcnModel model = train_baseline(kMnistDims, train_set, tr_cfg);
      save_model(tr_out, model);
      print({{"model", tr_out},
             {"epochs", tr_cfg.max_epochs},
             {"test_accuracy", evaluate(model, test, std::nullopt, std::nullopt, d, fmt, jobs)}});
    }
  } catch (const std::exception& e) {
    std::string msg = e.what();
    for (char& ch : msg)
      if (ch == '\n') ch = ' ';
    std::cerr << "error: " << msg << '\n';
    return 1;
  }
  return 0;
}
