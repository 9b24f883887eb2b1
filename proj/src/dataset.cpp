#include "earsleep/dataset.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <set>

#include "earsleep/error.hpp"
#include "earsleep/random.hpp"
#include "earsleep/signal.hpp"
#include "text_io.hpp"

namespace earsleep::dataset {

std::string feature_table_header() {
  std::string h;
  for (auto name : features::kFeatureNames) {
    h += name;
    h += ',';
  }
  h += "label,participant_id,recording_id,epoch_start_ms";
  return h;
}

std::string format_feature_table(const FeatureTable& table) {
  fmt::memory_buffer buf;
  auto out = std::back_inserter(buf);
  fmt::format_to(out, "{}\n", feature_table_header());
  for (const auto& r : table.rows) {
    for (double v : r.values) fmt::format_to(out, "{},", v);
    fmt::format_to(out, "{},{},{},{}\n", to_string(r.label), r.participant_id, r.recording_id, r.start_ms);
  }
  return fmt::to_string(buf);
}

void write_feature_table(const std::string& path, const FeatureTable& table) {
  io::write_file(path, format_feature_table(table));
}

FeatureTable parse_feature_table(std::string_view text) {
  io::LineReader lines(text);
  std::string_view line;
  if (!lines.next(line) || line != feature_table_header())
    throw Error(ErrorKind::ParseError, "line 1: feature matrix header does not match the feature registry");

  FeatureTable table;
  const std::size_t n_fields = features::kFeatureCount + 4;
  while (lines.next(line)) {
    if (line.empty()) continue;
    const auto fields = io::split(line, ',');
    const auto ln = lines.line_number();
    if (fields.size() != n_fields)
      throw Error(ErrorKind::ParseError, fmt::format("line {}: expected {} fields, got {}", ln, n_fields, fields.size()));
    EpochFeatures row;
    for (std::size_t i = 0; i < features::kFeatureCount; ++i) row.values[i] = io::parse_double(fields[i], ln);
    auto stage = parse_stage(fields[features::kFeatureCount]);
    if (!stage) throw Error(ErrorKind::ParseError, fmt::format("line {}: unknown stage label", ln));
    row.label = *stage;
    row.participant_id = std::string(fields[features::kFeatureCount + 1]);
    row.recording_id = std::string(fields[features::kFeatureCount + 2]);
    row.start_ms = io::parse_int(fields[features::kFeatureCount + 3], ln);
    table.rows.push_back(std::move(row));
  }
  return table;
}

FeatureTable read_feature_table(const std::string& path) { return parse_feature_table(io::read_file(path)); }

// ---------------------------------------------------------------------------

std::vector<int> Dataset::classes(Task task) const {
  std::vector<int> out(stage.size());
  for (std::size_t i = 0; i < stage.size(); ++i) out[i] = class_index(stage[i], task);
  return out;
}

std::vector<std::string> feature_names(std::size_t before, std::size_t after) {
  if (before == 0 && after == 0) return {features::kFeatureNames.begin(), features::kFeatureNames.end()};
  std::vector<std::string> names;
  for (std::ptrdiff_t off = -static_cast<std::ptrdiff_t>(before); off <= static_cast<std::ptrdiff_t>(after); ++off) {
    const std::string suffix = off == 0 ? "@t" : fmt::format("@t{:+d}", off);
    for (auto name : features::kFeatureNames) names.push_back(std::string(name) + suffix);
  }
  return names;
}

namespace {

// Row indices grouped by recording (first-appearance order), each group in
// time order.
std::vector<std::vector<std::size_t>> group_by_recording(const FeatureTable& table) {
  std::map<std::string, std::size_t> slot;
  std::vector<std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    auto [it, inserted] = slot.emplace(table.rows[i].recording_id, groups.size());
    if (inserted) groups.emplace_back();
    groups[it->second].push_back(i);
  }
  for (auto& g : groups)
    std::stable_sort(g.begin(), g.end(),
                     [&](std::size_t a, std::size_t b) { return table.rows[a].start_ms < table.rows[b].start_ms; });
  return groups;
}

void push_meta(Dataset& ds, const EpochFeatures& row, std::int64_t first_start) {
  ds.stage.push_back(row.label);
  ds.participant_id.push_back(row.participant_id);
  ds.recording_id.push_back(row.recording_id);
  ds.start_ms.push_back(row.start_ms);
  ds.epoch_index.push_back(static_cast<std::size_t>((row.start_ms - first_start) / signal::kEpochMs));
}

}  // namespace

Dataset unwindowed(const FeatureTable& table) {
  std::map<std::string, std::int64_t> first_start;
  for (const auto& r : table.rows) {
    auto [it, inserted] = first_start.emplace(r.recording_id, r.start_ms);
    if (!inserted) it->second = std::min(it->second, r.start_ms);
  }
  Dataset ds;
  ds.x = Matrix(0, features::kFeatureCount);
  for (const auto& r : table.rows) {
    ds.x.append_row(r.values);
    push_meta(ds, r, first_start[r.recording_id]);
  }
  return ds;
}

Dataset window(const FeatureTable& table, std::size_t before, std::size_t after) {
  Dataset ds;
  ds.window_before = before;
  ds.window_after = after;
  const std::size_t width = features::kFeatureCount * (before + 1 + after);
  ds.x = Matrix(0, width);

  std::vector<double> buf(width);
  for (const auto& group : group_by_recording(table)) {
    const auto m = static_cast<std::ptrdiff_t>(group.size());
    const std::int64_t first_start = table.rows[group.front()].start_ms;
    for (std::ptrdiff_t i = 0; i < m; ++i) {
      auto dst = buf.begin();
      for (std::ptrdiff_t off = -static_cast<std::ptrdiff_t>(before); off <= static_cast<std::ptrdiff_t>(after); ++off) {
        const auto j = static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(i + off, 0, m - 1));
        const auto& src = table.rows[group[j]].values;
        dst = std::copy(src.begin(), src.end(), dst);
      }
      ds.x.append_row(buf);
      push_meta(ds, table.rows[group[static_cast<std::size_t>(i)]], first_start);
    }
  }
  return ds;
}

// ---------------------------------------------------------------------------

namespace {

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double t = a[i] - b[i];
    d += t * t;
  }
  return d;
}

using Candidate = std::pair<double, std::size_t>;  // (squared distance, local index)

// k nearest same-class neighbours of every member, ascending by (distance,
// index). Each pair distance is computed once and offered to both rows'
// bounded max-heaps; (a-b)^2 == (b-a)^2 exactly, so this matches per-row
// brute force.
std::vector<std::vector<std::size_t>> all_neighbors(const Matrix& x, const std::vector<std::size_t>& idx, std::size_t k) {
  const std::size_t m = idx.size();
  std::vector<std::vector<Candidate>> heaps(m);
  auto offer = [k](std::vector<Candidate>& h, Candidate c) {
    if (h.size() < k) {
      h.push_back(c);
      std::push_heap(h.begin(), h.end());
    } else if (c < h.front()) {
      std::pop_heap(h.begin(), h.end());
      h.back() = c;
      std::push_heap(h.begin(), h.end());
    }
  };
  constexpr double kInf = std::numeric_limits<double>::infinity();
  const std::size_t d = x.cols();
  for (std::size_t a = 0; a < m; ++a) {
    const double* ra = x.row(idx[a]).data();
    for (std::size_t b = a + 1; b < m; ++b) {
      // Partial sums only grow, so a pair already farther than both rows'
      // current k-th neighbour can be abandoned.
      const double bound = heaps[a].size() < k || heaps[b].size() < k
                               ? kInf
                               : std::max(heaps[a].front().first, heaps[b].front().first);
      const double* rb = x.row(idx[b]).data();
      double dist = 0.0;
      std::size_t f = 0;
      while (f < d) {
        const std::size_t stop = std::min(d, f + 16);
        for (; f < stop; ++f) {
          const double t = ra[f] - rb[f];
          dist += t * t;
        }
        if (dist > bound) break;
      }
      if (dist > bound) continue;
      offer(heaps[a], {dist, b});
      offer(heaps[b], {dist, a});
    }
  }
  std::vector<std::vector<std::size_t>> out(m);
  for (std::size_t a = 0; a < m; ++a) {
    std::sort_heap(heaps[a].begin(), heaps[a].end());
    for (const auto& c : heaps[a]) out[a].push_back(c.second);
  }
  return out;
}

}  // namespace

SmoteResult smote(const Matrix& x, std::span<const int> y, std::size_t n_classes, const SmoteParams& params) {
  if (x.rows() != y.size()) throw Error(ErrorKind::ShapeError, "feature rows and labels differ in length");
  if (params.k_neighbors == 0) throw Error(ErrorKind::InvalidArgument, "SMOTE needs k_neighbors >= 1");

  std::vector<std::vector<std::size_t>> members(n_classes);
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i] < 0 || static_cast<std::size_t>(y[i]) >= n_classes)
      throw Error(ErrorKind::ShapeError, fmt::format("label {} outside the class range", y[i]));
    members[static_cast<std::size_t>(y[i])].push_back(i);
  }
  std::size_t majority = 0;
  for (std::size_t c = 0; c < n_classes; ++c) {
    if (members[c].empty()) throw Error(ErrorKind::SmoteInfeasible, fmt::format("class {} has no samples", c));
    majority = std::max(majority, members[c].size());
  }

  SmoteResult res;
  res.x = x;
  res.y.assign(y.begin(), y.end());
  res.n_original = x.rows();

  Rng rng(params.seed);
  std::vector<double> synth(x.cols());
  for (std::size_t c = 0; c < n_classes; ++c) {
    const auto& idx = members[c];
    const std::size_t m = idx.size();
    if (m == majority) continue;
    const std::size_t need = majority - m;

    if (m == 1) {
      res.duplicate_fallback_classes.push_back(static_cast<int>(c));
      for (std::size_t j = 0; j < need; ++j) {
        res.x.append_row(x.row(idx[0]));
        res.y.push_back(static_cast<int>(c));
        res.origin.push_back({idx[0], idx[0], 0.0});
      }
      continue;
    }

    const std::size_t k = std::min(params.k_neighbors, m - 1);
    std::vector<std::vector<std::size_t>> neighbors(m);  // filled on first use
    if (need >= m / 2) neighbors = all_neighbors(x, idx, k);
    auto knn = [&](std::size_t local) -> const std::vector<std::size_t>& {
      auto& nn = neighbors[local];
      if (!nn.empty()) return nn;
      std::vector<std::pair<double, std::size_t>> dist;
      dist.reserve(m - 1);
      for (std::size_t o = 0; o < m; ++o)
        if (o != local) dist.emplace_back(squared_distance(x.row(idx[local]), x.row(idx[o])), o);
      std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());
      for (std::size_t t = 0; t < k; ++t) nn.push_back(dist[t].second);
      return nn;
    };

    std::uniform_int_distribution<std::size_t> pick_base(0, m - 1);
    std::uniform_int_distribution<std::size_t> pick_nn(0, k - 1);
    std::uniform_real_distribution<double> pick_gap(0.0, 1.0);
    for (std::size_t j = 0; j < need; ++j) {
      const std::size_t b = pick_base(rng);
      const std::size_t n = knn(b)[pick_nn(rng)];
      const double gap = pick_gap(rng);
      const auto xb = x.row(idx[b]);
      const auto xn = x.row(idx[n]);
      for (std::size_t f = 0; f < x.cols(); ++f) {
        const double v = xb[f] + gap * (xn[f] - xb[f]);
        synth[f] = std::clamp(v, std::min(xb[f], xn[f]), std::max(xb[f], xn[f]));
      }
      res.x.append_row(synth);
      res.y.push_back(static_cast<int>(c));
      res.origin.push_back({idx[b], idx[n], gap});
    }
  }
  return res;
}

// ---------------------------------------------------------------------------

std::string_view to_string(CvVariant v) {
  return v == CvVariant::StratifiedKFold ? "stratified10" : "lopo";
}

std::vector<std::size_t> SplitPlan::test_indices(std::size_t f) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < fold.size(); ++i)
    if (fold[i] == f) out.push_back(i);
  return out;
}

std::vector<std::size_t> SplitPlan::train_indices(std::size_t f) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < fold.size(); ++i)
    if (fold[i] != f) out.push_back(i);
  return out;
}

SplitPlan make_splits(std::span<const int> classes, std::span<const std::string> participants, CvVariant variant,
                      std::uint64_t seed, std::size_t k) {
  if (classes.size() != participants.size())
    throw Error(ErrorKind::ShapeError, "class and participant columns differ in length");

  SplitPlan plan;
  plan.variant = variant;
  plan.seed = seed;
  plan.fold.assign(classes.size(), 0);

  if (variant == CvVariant::LeaveOneParticipantOut) {
    std::set<std::string> ids(participants.begin(), participants.end());
    if (ids.size() < 2)
      throw Error(ErrorKind::SplitInfeasible,
                  fmt::format("leave-one-participant-out needs >= 2 participants, found {}", ids.size()));
    plan.fold_names.assign(ids.begin(), ids.end());
    plan.n_folds = ids.size();
    for (std::size_t i = 0; i < participants.size(); ++i)
      plan.fold[i] = static_cast<std::size_t>(
          std::lower_bound(plan.fold_names.begin(), plan.fold_names.end(), participants[i]) - plan.fold_names.begin());
    return plan;
  }

  if (k < 2) throw Error(ErrorKind::InvalidArgument, "k-fold needs k >= 2");
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < classes.size(); ++i) by_class[classes[i]].push_back(i);
  for (const auto& [c, idx] : by_class)
    if (idx.size() < k)
      throw Error(ErrorKind::SplitInfeasible,
                  fmt::format("class {} has {} samples; stratified {}-fold needs at least {}", c, idx.size(), k, k));

  plan.n_folds = k;
  for (std::size_t f = 0; f < k; ++f) plan.fold_names.push_back(fmt::format("fold{}", f));
  Rng rng(seed);
  std::size_t offset = 0;
  for (auto& [c, idx] : by_class) {
    std::shuffle(idx.begin(), idx.end(), rng);
    for (std::size_t p = 0; p < idx.size(); ++p) plan.fold[idx[p]] = (offset + p) % k;
    offset = (offset + idx.size()) % k;
  }
  return plan;
}

std::string format_split_plan(const SplitPlan& plan) {
  fmt::memory_buffer buf;
  auto out = std::back_inserter(buf);
  fmt::format_to(out, "sample_id,fold,role\n");
  for (std::size_t f = 0; f < plan.n_folds; ++f)
    for (std::size_t i = 0; i < plan.fold.size(); ++i)
      fmt::format_to(out, "{},{},{}\n", i, f, plan.fold[i] == f ? "test" : "train");
  return fmt::to_string(buf);
}

}  // namespace earsleep::dataset
