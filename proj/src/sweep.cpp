#include "fltlab/sweep.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <string>

#include "fltlab/faft.hpp"
#include "fltlab/mitigation.hpp"
#include "fltlab/model_io.hpp"
#include "fltlab/parallel.hpp"

namespace fltlab {

namespace {

struct Cell {
  FaultSite site;
  std::optional<MitigationChoice> mitigation;
};

bool applies(MitigationChoice m) {
  return m == MitigationChoice::ISc || m == MitigationChoice::IScSh || m == MitigationChoice::ETOps;
}

Dataset pick_samples(const Dataset& data, Index limit, std::uint64_t seed) {
  if (limit <= 0 || limit >= data.size()) return data;
  std::vector<Index> idx(static_cast<std::size_t>(data.size()));
  std::iota(idx.begin(), idx.end(), Index{0});
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(static_cast<std::size_t>(limit));
  std::sort(idx.begin(), idx.end());
  return data.subset(idx);
}

}  // namespace

void SweepConfig::validate() const {
  if (tile_dim < 1) throw std::domain_error("tile_dim must be >= 1");
  if (pe_stride < 1) throw std::domain_error("pe_stride must be >= 1");
  if (sample_limit < 0) throw std::domain_error("sample_limit must be >= 0");
  for (int b : bits) {
    if (b < 0 || b >= format.total_bits) {
      throw std::domain_error("bits: position " + std::to_string(b) + " outside " +
                              std::string(to_string(format.name)));
    }
  }
  for (int s : stuck_values) {
    if (s != 0 && s != 1) throw std::domain_error("stuck_values: " + std::to_string(s) + " is not 0 or 1");
  }
}

std::vector<std::pair<int, int>> sampled_pes(int tile_dim, int stride) {
  std::vector<std::pair<int, int>> out;
  for (int p = 0; p < tile_dim * tile_dim; p += stride) out.emplace_back(p / tile_dim, p % tile_dim);
  return out;
}

SweepReport run_sweep(const SweepConfig& cfg, const FcnModel& model, const Dataset& data) {
  cfg.validate();
  model.validate();
  const Dataset samples = pick_samples(data, cfg.sample_limit, cfg.seed);
  const FloatFormat& fmt = cfg.format;
  const int jobs = resolve_jobs(cfg.jobs);

  std::vector<Cell> cells;
  for (FaultKind kind : cfg.kinds) {
    for (int bit : cfg.bits) {
      for (int stuck : cfg.stuck_values) {
        for (auto [x, y] : sampled_pes(cfg.tile_dim, cfg.pe_stride)) {
          const FaultSite site{kind, x, y, {bit, stuck}};
          cells.push_back({site, std::nullopt});
          const MitigationChoice m = select_mitigation(fmt, site);
          if (cfg.mitigate && applies(m)) cells.push_back({site, m});
        }
      }
    }
  }

  SweepReport report;
  if (cells.empty()) return report;
  report.baseline_accuracy = evaluate(model, samples, std::nullopt, std::nullopt, cfg.tile_dim, fmt, jobs);

  std::vector<double> accuracy(cells.size());
  parallel_for(cells.size(), jobs, [&](std::size_t i) {
    accuracy[i] = evaluate(model, samples, cells[i].site, cells[i].mitigation, cfg.tile_dim, fmt, 1);
  });

  // Per-PE rows in cell order, then mean and min per group in first-seen order.
  using GroupKey = std::tuple<int, int, int, std::string>;
  std::vector<GroupKey> group_order;
  std::map<GroupKey, std::vector<double>> groups;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const Cell& c = cells[i];
    const std::string mitigation(c.mitigation ? to_string(*c.mitigation) : "none");
    report.rows.push_back({std::string(to_string(c.site.kind)), c.site.bit.bit_position, c.site.bit.stuck_value,
                           c.site.pe_row, c.site.pe_col, mitigation, accuracy[i],
                           relative_error_increase(accuracy[i], report.baseline_accuracy), "none"});
    const GroupKey key{static_cast<int>(c.site.kind), c.site.bit.bit_position, c.site.bit.stuck_value, mitigation};
    auto [it, inserted] = groups.try_emplace(key);
    if (inserted) group_order.push_back(key);
    it->second.push_back(accuracy[i]);
  }
  for (const GroupKey& key : group_order) {
    const auto& accs = groups[key];
    const double mean = std::accumulate(accs.begin(), accs.end(), 0.0) / static_cast<double>(accs.size());
    const double min = *std::min_element(accs.begin(), accs.end());
    const auto& [kind, bit, stuck, mitigation] = key;
    const std::string kind_name(to_string(static_cast<FaultKind>(kind)));
    for (auto [name, acc] : {std::pair{"mean", mean}, std::pair{"min", min}}) {
      report.rows.push_back({kind_name, bit, stuck, -1, -1, mitigation, acc,
                             relative_error_increase(acc, report.baseline_accuracy), name});
    }
  }
  return report;
}

SweepReport run_sweep(const SweepConfig& cfg, const std::filesystem::path& model_path,
                      const std::filesystem::path& images_path, const std::filesystem::path& labels_path) {
  const FcnModel model = load_model(model_path);
  const Dataset data = load_dataset(images_path, labels_path);
  return run_sweep(cfg, model, data);
}

std::vector<int> parse_bit_list(const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string item;
  auto to_int = [&](const std::string& s) {
    std::size_t used = 0;
    int v = 0;
    try {
      v = std::stoi(s, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (s.empty() || used != s.size()) throw std::invalid_argument("bits: cannot parse '" + s + "'");
    return v;
  };
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    const auto dash = item.find('-', 1);
    if (dash == std::string::npos) {
      out.push_back(to_int(item));
    } else {
      const int lo = to_int(item.substr(0, dash));
      const int hi = to_int(item.substr(dash + 1));
      if (hi < lo) throw std::invalid_argument("bits: empty range '" + item + "'");
      for (int b = lo; b <= hi; ++b) out.push_back(b);
    }
  }
  return out;
}

}  // namespace fltlab
