// Acceptance checks. Each run evaluates one criterion and prints a single
// "criterion N: PASS|FAIL" line, preceded by indented detail lines.

#include <CLI11.hpp>

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>

#include "ber_tables.hpp"
#include "fltlab/faft.hpp"
#include "fltlab/idx.hpp"
#include "fltlab/mitigation.hpp"
#include "fltlab/parallel.hpp"
#include "fltlab/sweep.hpp"
#include "fltlab/systolic.hpp"

using namespace fltlab;

namespace {

struct Options {
  std::string data_dir;
  int jobs = 1;
};

struct Outcome {
  bool pass;
  std::string summary;
};

const FloatFormat* const kAll[] = {&kFloat32, &kFloat16, &kBFloat16};
const FaultKind kKinds[] = {FaultKind::RightLink, FaultKind::DownLink, FaultKind::WeightRegister};

std::string fmt_double(double v, int precision = 4) {
  std::ostringstream s;
  s.precision(precision);
  s << v;
  return s.str();
}

void note(const std::string& line) { std::cout << "  " << line << '\n'; }

Matrix random_f32(Index rows, Index cols, std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> dist(lo, hi);
  return Matrix::NullaryExpr(rows, cols, [&] { return static_cast<double>(static_cast<float>(dist(rng))); });
}

double normwise(const Matrix& got, const Matrix& want) {
  const double scale = want.cwiseAbs().maxCoeff();
  const double diff = (got - want).cwiseAbs().maxCoeff();
  if (std::isnan(diff)) return std::numeric_limits<double>::infinity();
  return scale == 0.0 ? diff : diff / scale;
}

FaultSite site(FaultKind kind, int x, int y, int bit, int stuck) { return {kind, x, y, {bit, stuck}}; }

// Baseline used by the MNIST criteria: 15 fault-free epochs, seed 1.
FcnModel mnist_baseline(const Dataset& train) {
  TrainConfig cfg;
  cfg.max_epochs = 15;
  cfg.seed = 1;
  return train_baseline(kMnistDims, train, cfg);
}

std::string pct(double accuracy) { return fmt_double(100.0 * accuracy, 4) + "%"; }

// 1. Fault-free tiled product against the long-double oracle.
Outcome criterion1(const Options& opt) {
  constexpr int kShapes = 100;
  std::vector<double> errors(kShapes);
  std::vector<std::array<Index, 4>> shapes(kShapes);
  std::mt19937_64 seeder(1);
  std::vector<std::uint64_t> seeds(kShapes);
  for (auto& s : seeds) s = seeder();
  parallel_for(kShapes, opt.jobs, [&](std::size_t t) {
    std::mt19937_64 rng(seeds[t]);
    std::uniform_int_distribution<Index> dim(1, 256);
    const int dims[] = {4, 8, 16};
    const Index m = dim(rng), k = dim(rng), n = dim(rng);
    const int d = dims[rng() % 3];
    const Matrix a = random_f32(m, k, rng, -1.0, 1.0), w = random_f32(k, n, rng, -1.0, 1.0);
    errors[t] = normwise(tiled_mm(a, w, d, std::nullopt, 0.0, kFloat32), reference_mm(a, w, kFloat32));
    shapes[t] = {m, k, n, d};
  });
  const auto worst = std::max_element(errors.begin(), errors.end()) - errors.begin();
  const auto& s = shapes[static_cast<std::size_t>(worst)];
  note("worst relative error " + fmt_double(errors[worst]) + " at " + std::to_string(s[0]) + "x" +
       std::to_string(s[1]) + " * " + std::to_string(s[1]) + "x" + std::to_string(s[2]) + ", d=" +
       std::to_string(s[3]));
  const bool pass = errors[worst] <= 1e-4;
  return {pass, std::to_string(kShapes) + " shapes, max relative error " + fmt_double(errors[worst]) + " (limit 1e-4)"};
}

// 2. |v| <= c  <=>  zeros at exponent bits [f, msb].
Outcome criterion2(const Options&) {
  struct Tally {
    long forward_violations = 0;  // |v| <= c but unsafe
    long reverse_violations = 0;  // safe but |v| > c
    long tight_violations = 0;    // mismatches against the largest safe value
    std::string example;
  };
  auto check = [](const FloatFormat& f, double v, Tally& t) {
    for (int bit = f.exponent_lsb(); bit <= f.exponent_msb(); ++bit) {
      const double c = scale_constant(f, bit);
      const double tight = decode((std::uint32_t{1} << bit) - 1u, f);
      const bool within = std::fabs(v) <= c;
      const bool safe = in_safe_range(v, f, bit);
      if (within && !safe) ++t.forward_violations;
      if (!within && safe) {
        if (t.reverse_violations++ == 0) {
          char buf[160];
          std::snprintf(buf, sizeof buf, "%s bit %d: v = %.9g is safe but exceeds c = %.9g",
                        std::string(to_string(f.name)).c_str(), bit, v, c);
          t.example = buf;
        }
      }
      if ((std::fabs(v) <= tight) != safe) ++t.tight_violations;
    }
  };

  std::map<FormatName, Tally> tallies;
  for (const FloatFormat* f : {&kFloat16, &kBFloat16}) {
    for (std::uint32_t b = 0; b < 0x10000; ++b) check(*f, decode(b, *f), tallies[f->name]);
  }
  std::mt19937 rng(2);
  for (int i = 0; i < 1000000; ++i) check(kFloat32, decode(static_cast<std::uint32_t>(rng()), kFloat32),
                                          tallies[FormatName::f32]);

  bool pass = true;
  for (const auto& [name, t] : tallies) {
    note(std::string(to_string(name)) + ": |v|<=c but unsafe: " + std::to_string(t.forward_violations) +
         "; safe but |v|>c: " + std::to_string(t.reverse_violations) +
         "; mismatches against the largest safe value: " + std::to_string(t.tight_violations));
    if (!t.example.empty()) note("  e.g. " + t.example);
    pass = pass && t.forward_violations == 0 && t.reverse_violations == 0;
  }
  return {pass, pass ? "equivalence holds for every pattern"
                     : "only |v|<=c => safe holds; safe values above c exist below each power-of-two bound"};
}

// 3. ISc/IScSh restore the fault-free output of a random 32-16-8 network.
Outcome criterion3(const Options& opt) {
  FcnModel model = random_model({32, 16, 8}, 3);
  std::mt19937_64 rng(3);
  for (Layer& layer : model.layers) layer.bias = random_f32(1, layer.out_dim(), rng, -0.1, 0.1);
  const Matrix x = random_f32(64, 32, rng, 0.0, 1.0);
  const int d = 8;

  bool pass = true;
  long total_cases = 0, total_fail = 0;
  for (const FloatFormat* f : kAll) {
    const double tol = f->name == FormatName::f32 ? 1e-6 : 1e-2;
    const Matrix clean = simulated_forward(model, x, std::nullopt, d, *f);
    const std::vector<int> clean_top = argmax_rows(clean);

    std::vector<FaultSite> cases;
    for (FaultKind kind : kKinds)
      for (int bit = f->exponent_lsb(); bit <= f->exponent_msb(); ++bit)
        for (int pe = 0; pe < d * d; ++pe) cases.push_back(site(kind, pe / d, pe % d, bit, 0));
    for (int stuck = 0; stuck <= 1; ++stuck)
      for (int pe = 0; pe < d * d; ++pe) cases.push_back(site(FaultKind::DownLink, pe / d, pe % d, f->sign_bit(), stuck));

    std::vector<double> err(cases.size());
    std::vector<char> same_top(cases.size());
    parallel_for(cases.size(), opt.jobs, [&](std::size_t i) {
      const Matrix out = iscsh_inference(model, x, cases[i], d, *f);
      err[i] = normwise(out, clean);
      same_top[i] = argmax_rows(out) == clean_top;
    });

    // Worst error per (kind, bit, stuck) group.
    std::map<std::tuple<int, int, int>, double> worst;
    long fails = 0, top_mismatch = 0;
    for (std::size_t i = 0; i < cases.size(); ++i) {
      auto key = std::make_tuple(static_cast<int>(cases[i].kind), cases[i].bit.bit_position, cases[i].bit.stuck_value);
      worst[key] = std::max(worst[key], err[i]);
      if (!(err[i] <= tol)) ++fails;
      if (!same_top[i]) ++top_mismatch;
    }
    std::string line = std::string(to_string(f->name)) + ": " + std::to_string(fails) + "/" +
                       std::to_string(cases.size()) + " cases above " + fmt_double(tol, 1) + ", " +
                       std::to_string(top_mismatch) + " with a changed argmax";
    note(line);
    for (const auto& [key, e] : worst) {
      if (e > tol) {
        note("  " + std::string(to_string(static_cast<FaultKind>(std::get<0>(key)))) + " bit " +
             std::to_string(std::get<1>(key)) + " stuck-" + std::to_string(std::get<2>(key)) +
             ": worst relative error " + fmt_double(e, 3));
      }
    }
    total_cases += static_cast<long>(cases.size());
    total_fail += fails;
    pass = pass && fails == 0 && (f->name != FormatName::f32 || top_mismatch == 0);
  }
  return {pass, std::to_string(total_fail) + "/" + std::to_string(total_cases) +
                    " mitigated outputs outside tolerance (f32 1e-6, f16/bf16 1e-2)"};
}

// 4. MNIST baseline, bf16 collapse and IScSh restoration.
Outcome criterion4(const Options& opt) {
  const Dataset train = load_mnist_split(opt.data_dir, "train");
  const Dataset test = load_mnist_split(opt.data_dir, "test");
  const FcnModel model = mnist_baseline(train);
  const int d = 8;
  const double base_f32 = evaluate(model, test, std::nullopt, std::nullopt, d, kFloat32, opt.jobs);
  const double base_bf16 = evaluate(model, test, std::nullopt, std::nullopt, d, kBFloat16, opt.jobs);
  note("train " + std::to_string(train.size()) + ", test " + std::to_string(test.size()) + " samples");
  note("fault-free test accuracy: f32 " + pct(base_f32) + ", bf16 " + pct(base_bf16));
  bool pass = std::fabs(base_f32 - 0.923) <= 0.02;

  // The fault location is not fixed, so the collapse is judged on the mean
  // over every PE of the array.
  double collapse_sum = 0.0, collapse_min = 1.0, collapse_max = 0.0;
  for (int pe = 0; pe < d * d; ++pe) {
    const double acc =
        evaluate(model, test, site(FaultKind::DownLink, pe / d, pe % d, 14, 1), std::nullopt, d, kBFloat16, opt.jobs);
    collapse_sum += acc;
    collapse_min = std::min(collapse_min, acc);
    collapse_max = std::max(collapse_max, acc);
  }
  const double collapsed = collapse_sum / (d * d);
  note("bf16 down_link bit 14 stuck-1, unmitigated over all 64 PEs: mean " + pct(collapsed) + ", range " +
       pct(collapse_min) + " to " + pct(collapse_max));
  pass = pass && collapsed < 0.20;

  // IScSh-eligible stuck-at-0 exponent and sign variants on the PE diagonal.
  double worst_gap = 0.0;
  for (const auto& [kind, bit, stuck] : {std::tuple{FaultKind::RightLink, 14, 0}, {FaultKind::DownLink, 14, 0},
                                         {FaultKind::WeightRegister, 14, 0}, {FaultKind::DownLink, 15, 0},
                                         {FaultKind::DownLink, 15, 1}}) {
    double faulty_sum = 0.0, mitigated_min = 1.0;
    for (int pe = 0; pe < d; ++pe) {
      const FaultSite f = site(kind, pe, pe, bit, stuck);
      faulty_sum += evaluate(model, test, f, std::nullopt, d, kBFloat16, opt.jobs);
      const double mitigated = evaluate(model, test, f, select_mitigation(kBFloat16, f), d, kBFloat16, opt.jobs);
      mitigated_min = std::min(mitigated_min, mitigated);
      worst_gap = std::max(worst_gap, base_bf16 - mitigated);
    }
    note("bf16 " + std::string(to_string(kind)) + " bit " + std::to_string(bit) + " stuck-" + std::to_string(stuck) +
         " on the diagonal: unmitigated mean " + pct(faulty_sum / d) + ", IScSh worst " + pct(mitigated_min));
  }
  pass = pass && worst_gap <= 0.005;
  return {pass, "baseline " + pct(base_f32) + " (target 92.3% +- 2), mean collapse " + pct(collapsed) +
                    " (< 20%), largest restored gap " + fmt_double(100 * worst_gap, 3) + " points (<= 0.5)"};
}

// 5. Fine tuning recovers the worst high-mantissa fault.
Outcome criterion5(const Options& opt) {
  const Dataset train_all = load_mnist_split(opt.data_dir, "train");
  const Dataset test = load_mnist_split(opt.data_dir, "test");
  const FcnModel model = mnist_baseline(train_all);
  const int d = 8;

  // The last 1000 training rows pick the worst PE and drive early stopping.
  const Index holdout_n = 1000, n_train = train_all.size() - holdout_n;
  std::vector<Index> tail(static_cast<std::size_t>(holdout_n));
  for (Index i = 0; i < holdout_n; ++i) tail[static_cast<std::size_t>(i)] = n_train + i;
  const Dataset holdout = train_all.subset(tail);

  FaultSite worst = site(FaultKind::DownLink, 0, 0, 22, 1);
  double worst_acc = 2.0;
  for (int pe = 0; pe < d * d; ++pe) {
    const FaultSite f = site(FaultKind::DownLink, pe / d, pe % d, 22, 1);
    const double acc = evaluate(model, holdout, f, std::nullopt, d, kFloat32, opt.jobs);
    if (acc < worst_acc) {
      worst_acc = acc;
      worst = f;
    }
  }
  note("worst PE for down_link bit 22 stuck-1 on the holdout rows: (" + std::to_string(worst.pe_row) + ", " +
       std::to_string(worst.pe_col) + ")");

  TrainConfig cfg;  // 1000 samples, batch 64, at most 20 epochs, patience 3
  const FaftResult r = faft(model, train_all.head(n_train), holdout, worst, d, kFloat32, cfg, opt.jobs);
  const double clean = evaluate(model, test, std::nullopt, std::nullopt, d, kFloat32, opt.jobs);
  const double before = evaluate(model, test, worst, std::nullopt, d, kFloat32, opt.jobs);
  const double after = evaluate(r.model, test, worst, std::nullopt, d, kFloat32, opt.jobs);
  const double gap = clean - before;
  const double recovered = gap > 0 ? (after - before) / gap : 0.0;
  note("test accuracy: fault-free " + pct(clean) + ", faulty " + pct(before) + ", after faFT " + pct(after) + " (" +
       std::to_string(r.epochs_run) + " epochs, best " + std::to_string(r.best_epoch) + ")");
  const bool pass = gap >= 0.002 && recovered >= 0.5;
  return {pass, "drop " + fmt_double(100 * gap, 3) + " points (>= 0.2), recovered " +
                    fmt_double(100 * recovered, 3) + "% of it (>= 50%)"};
}

// 6. ETOps products equal the fault-free product.
Outcome criterion6(const Options&) {
  std::mt19937_64 rng(6);
  const int d = 8;
  long counts[3] = {0, 0, 0}, failures = 0;
  double worst = 0.0;
  for (int t = 0; t < 10000; ++t) {
    const Matrix a = random_f32(d, d, rng, -1.0, 1.0);
    Matrix w = random_f32(d, d, rng, -1.0, 1.0);
    const FaultSite f = site(FaultKind::WeightRegister, int(rng() % d), int(rng() % d), 31, int(rng() % 2));
    // One pair in three gets a column of the wrong sign only, forcing the inversion branch.
    if (t % 3 == 0) w.col(f.pe_col) = w.col(f.pe_col).cwiseAbs() * (f.bit.stuck_value ? 1.0 : -1.0);
    const ETOpsPlan plan = etops_plan(w, f);
    ++counts[static_cast<int>(plan.action)];
    const Matrix got = etops_execute(a, w, plan, f, kFloat32);
    if (plan.action == ETOpsPlan::Action::ColumnInversion) {
      if (got != systolic_tile_mm(a, w, std::nullopt, 0.0, kFloat32)) ++failures;
    } else {
      const double e = normwise(got, reference_mm(a, w, kFloat32));
      worst = std::max(worst, e);
      if (e > 1e-4) ++failures;
    }
  }
  note("plans: no action " + std::to_string(counts[0]) + ", row swap " + std::to_string(counts[1]) +
       ", column inversion " + std::to_string(counts[2]));
  const bool pass = failures == 0 && counts[0] > 0 && counts[1] > 0 && counts[2] > 0;
  return {pass, std::to_string(failures) + "/10000 mismatches, max relative error " + fmt_double(worst) +
                    " outside the bit-exact inversion branch"};
}

// 7. Technique, requirement and BER tables.
Outcome criterion7(const Options&) {
  using M = MitigationChoice;
  // Technique table rows (right link 0/1, down link 0/1, register 0/1) by
  // column: low mantissa, high mantissa, exponent, sign.
  const M rows[6][4] = {
      {M::NoneNeeded, M::FaFT, M::IScSh, M::Unmitigable}, {M::NoneNeeded, M::FaFT, M::Unmitigable, M::Unmitigable},
      {M::NoneNeeded, M::FaFT, M::IScSh, M::IScSh},       {M::NoneNeeded, M::FaFT, M::Unmitigable, M::IScSh},
      {M::NoneNeeded, M::FaFT, M::IScSh, M::ETOps},       {M::NoneNeeded, M::FaFT, M::Unmitigable, M::ETOps},
  };
  auto column = [](const FloatFormat& f, int bit) {
    const int hi = f.name == FormatName::f32 ? 22 : f.name == FormatName::f16 ? 9 : 4;
    if (bit < hi) return 0;
    if (bit < f.exponent_lsb()) return 1;
    if (bit < f.sign_bit()) return 2;
    return 3;
  };
  using enum ScalingOp;
  long technique_cells = 0, technique_bad = 0, requirement_cells = 0, requirement_bad = 0;
  for (const FloatFormat* f : kAll) {
    for (FaultKind kind : kKinds) {
      for (int stuck = 0; stuck <= 1; ++stuck) {
        for (int bit = 0; bit < f->total_bits; ++bit) {
          const FaultSite s = site(kind, 0, 0, bit, stuck);
          const M want = rows[static_cast<int>(kind) * 2 + stuck][column(*f, bit)];
          ++technique_cells;
          if (select_mitigation(*f, s) != want) ++technique_bad;

          ++requirement_cells;
          if (want != M::IScSh) {
            try {
              required_operations(*f, s);
              ++requirement_bad;
            } catch (const std::domain_error&) {
            }
            continue;
          }
          ScalingOps expected;
          if (bit == f->sign_bit()) {
            expected = {ShiftBias, ScaleW_unit, ScaleA_unit};
          } else if (kind == FaultKind::RightLink) {
            expected = {ScaleA_unit, ScaleA_c};
          } else if (kind == FaultKind::DownLink) {
            expected = {ScaleW_unit, ScaleW_overD, ScaleA_unit};
          } else {
            expected = {ScaleW_c};
          }
          if (required_operations(*f, s) != expected) ++requirement_bad;
        }
      }
    }
  }
  note("technique table: " + std::to_string(technique_cells - technique_bad) + "/" +
       std::to_string(technique_cells) + " cells");
  note("requirements table: " + std::to_string(requirement_cells - requirement_bad) + "/" +
       std::to_string(requirement_cells) + " cells");

  long ber_cells = 0, ber_bad = 0, exact_3sf = 0;
  for (const auto& table : {testdata::link_ber_table(), testdata::register_ber_table()}) {
    for (const testdata::BerCell& cell : table) {
      const FloatFormat& f = format_of(cell.format);
      const std::string name = std::string(to_string(cell.site)) + " " + std::string(to_string(cell.cls)) +
                               " d=" + std::to_string(cell.d) + " " + std::string(to_string(cell.format));
      const double quoted = round_sig(quoted_max_mitigated_ber(cell.cls, cell.site, cell.d, f), cell.digits);
      const double exact = max_mitigated_ber(cell.cls, cell.site, cell.d, f);
      if (cell.outlier) {
        note("flagged outlier " + name + ": table " + fmt_double(cell.value, 3) + ", closed form " +
             fmt_double(exact, 3));
        continue;
      }
      ++ber_cells;
      if (std::fabs(quoted - cell.value) > 1e-9 * cell.value) {
        ++ber_bad;
        note("mismatch " + name + ": table " + fmt_double(cell.value, 3) + ", computed " + fmt_double(quoted, 3));
      }
      if (std::fabs(round_sig(exact, cell.digits) - cell.value) <= 1e-9 * cell.value) ++exact_3sf;
    }
  }
  note("BER cells: " + std::to_string(ber_cells - ber_bad) + "/" + std::to_string(ber_cells) +
       " match as quoted; the unrounded closed form matches " + std::to_string(exact_3sf) + " of them directly");
  const bool pass = technique_bad == 0 && requirement_bad == 0 && ber_bad == 0;
  return {pass, std::to_string(technique_bad + requirement_bad + ber_bad) + " table cells differ, 2 BER outliers flagged"};
}

// 8. Straight-through gradients against central differences.
Outcome criterion8(const Options&) {
  FcnModel model = random_model({8, 6, 4, 3}, 8);
  std::mt19937_64 rng(8);
  for (Layer& layer : model.layers) layer.bias = random_f32(1, layer.out_dim(), rng, -0.1, 0.1);
  const Matrix x = random_f32(16, 8, rng, -1.0, 1.0);
  std::vector<int> labels(16);
  for (int& l : labels) l = static_cast<int>(rng() % 3);

  const Gradients g = backward_straight_through(model, forward_reference(model, x), labels);
  auto loss = [&](const FcnModel& m) { return softmax_cross_entropy(forward_reference(m, x).logits, labels); };
  const double h = 1e-6;
  double worst = 0.0;
  long params = 0;
  auto probe = [&](double& param, double analytic) {
    const double saved = param;
    param = saved + h;
    const double up = loss(model);
    param = saved - h;
    const double down = loss(model);
    param = saved;
    const double numeric = (up - down) / (2 * h);
    const double denom = std::max({std::fabs(numeric), std::fabs(analytic), 1e-6});
    worst = std::max(worst, std::fabs(numeric - analytic) / denom);
    ++params;
  };
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    Layer& layer = model.layers[l];
    for (Index i = 0; i < layer.weight.rows(); ++i)
      for (Index j = 0; j < layer.weight.cols(); ++j) probe(layer.weight(i, j), g.weight[l](i, j));
    for (Index j = 0; j < layer.bias.size(); ++j) probe(layer.bias(j), g.bias[l](j));
  }
  note(std::to_string(params) + " parameters probed with step " + fmt_double(h, 1));
  const bool pass = worst <= 1e-3;
  return {pass, "max relative deviation " + fmt_double(worst, 3) + " (limit 1e-3)"};
}

// 9. Qualitative characterisation on the desk network.
Outcome criterion9(const Options& opt) {
  const Dataset train = load_mnist_split(opt.data_dir, "train");
  const Dataset test = load_mnist_split(opt.data_dir, "test");
  const FcnModel model = mnist_baseline(train);

  SweepConfig cfg;
  cfg.format = kFloat32;
  cfg.tile_dim = 8;
  cfg.pe_stride = 9;  // the diagonal of an 8x8 array
  cfg.jobs = opt.jobs;

  auto group_means = [&](std::vector<int> bits, std::vector<int> stuck) {
    cfg.bits = std::move(bits);
    cfg.stuck_values = std::move(stuck);
    const SweepReport report = run_sweep(cfg, model, test);
    std::vector<SweepRow> means;
    for (const SweepRow& row : report.rows)
      if (row.aggregate == "mean") means.push_back(row);
    return std::make_pair(report.baseline_accuracy, means);
  };
  auto label = [](const SweepRow& r) {
    return r.fault_kind + " bit " + std::to_string(r.bit) + " stuck-" + std::to_string(r.stuck_value);
  };

  const auto [baseline, mantissa] = group_means({0, 1, 2, 3}, {0, 1});
  note("fault-free accuracy " + pct(baseline) + " on " + std::to_string(test.size()) + " test samples");
  bool mantissa_ok = true;
  double mantissa_worst = 0.0;
  for (const SweepRow& r : mantissa) {
    mantissa_worst = std::max(mantissa_worst, r.relative_error_increase);
    if (!(r.relative_error_increase < 0.01)) {
      mantissa_ok = false;
      note("mantissa " + label(r) + ": mean REI " + fmt_double(r.relative_error_increase, 3));
    }
  }
  note("mantissa bits 0-3: worst mean REI " + fmt_double(100 * mantissa_worst, 3) + "% over " +
       std::to_string(mantissa.size()) + " groups");

  const auto [b2, exponent] = group_means({23, 24, 25, 26, 27, 28, 29, 30}, {0});
  long negligible = 0;
  for (const SweepRow& r : exponent) {
    if (r.relative_error_increase < 0.01) ++negligible;
    note("exponent " + label(r) + ": mean REI " + fmt_double(100 * r.relative_error_increase, 3) + "%");
  }
  const bool exponent_ok = 2 * negligible > static_cast<long>(exponent.size());

  const auto [b3, msb] = group_means({30}, {1});
  bool msb_ok = true;
  for (const SweepRow& r : msb) {
    note("exponent MSB " + label(r) + ": mean accuracy " + pct(r.accuracy));
    if (!(r.accuracy < 0.5)) msb_ok = false;
  }
  const bool pass = mantissa_ok && exponent_ok && msb_ok;
  return {pass, std::string("mantissa low bits ") + (mantissa_ok ? "ok" : "not ok") + ", exponent stuck-0 " +
                    std::to_string(negligible) + "/" + std::to_string(exponent.size()) +
                    " groups under 1% REI, MSB stuck-1 " + (msb_ok ? "catastrophic" : "not catastrophic")};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  int criterion = 0;
  Options opt;
  opt.data_dir = FLTLAB_DEFAULT_DATA_DIR;
  app.add_option("--criterion", criterion, "Criterion number")->required()->check(CLI::Range(1, 9));
  app.add_option("--data-dir", opt.data_dir, "Directory with the MNIST IDX files");
  app.add_option("--jobs", opt.jobs, "Worker threads (0 = all cores)");
  CLI11_PARSE(app, argc, argv);
  opt.jobs = resolve_jobs(opt.jobs);

  const std::function<Outcome(const Options&)> criteria[] = {criterion1, criterion2, criterion3,
                                                             criterion4, criterion5, criterion6,
                                                             criterion7, criterion8, criterion9};
  const auto start = std::chrono::steady_clock::now();
  Outcome out{false, ""};
  try {
    out = criteria[criterion - 1](opt);
  } catch (const std::exception& e) {
    out = {false, std::string("error: ") + e.what()};
  }
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::cout << "criterion " << criterion << ": " << (out.pass ? "PASS" : "FAIL") << "  " << out.summary << " ["
            << fmt_double(seconds, 3) << " s]" << std::endl;
  return out.pass ? 0 : 1;
}
