#include "kfdp/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "kfdp/error.hpp"

namespace kfdp {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_input: return "InvalidInput";
    case ErrorCode::duplicate_id: return "DuplicateId";
    case ErrorCode::empty_after_preprocessing: return "EmptyAfterPreprocessing";
    case ErrorCode::infeasible_k: return "InfeasibleK";
    case ErrorCode::invalid_step_size: return "InvalidStepSize";
    case ErrorCode::plan_mismatch: return "PlanMismatch";
    case ErrorCode::oracle_size_exceeded: return "OracleSizeExceeded";
    case ErrorCode::unknown_id: return "UnknownId";
    case ErrorCode::dropped_id: return "DroppedId";
    case ErrorCode::unknown_session: return "UnknownSession";
  }
  return "Error";
}

RawStats::RawStats(std::vector<StatEntry> entries) : entries_(std::move(entries)) {
  if (entries_.empty()) throw Error(ErrorCode::invalid_input, "no statistics supplied");
  std::unordered_set<std::string> seen;
  seen.reserve(entries_.size());
  for (const auto& e : entries_) {
    if (!std::isfinite(e.w)) {
      throw Error(ErrorCode::invalid_input, "non-finite statistic for id '" + e.id + "'");
    }
    if (!seen.insert(e.id).second) {
      throw Error(ErrorCode::duplicate_id, "duplicate id '" + e.id + "'");
    }
  }
}

IndexSet::IndexSet(std::vector<int> members) : members_(std::move(members)) {
  std::sort(members_.begin(), members_.end());
  members_.erase(std::unique(members_.begin(), members_.end()), members_.end());
  if (!members_.empty() && members_.front() < 1) {
    throw Error(ErrorCode::invalid_input, "positions are 1-based");
  }
}

IndexSet IndexSet::from_sorted(std::vector<int> members) {
  IndexSet s;
  s.members_ = std::move(members);
  return s;
}

bool IndexSet::contains(int pos) const {
  return std::binary_search(members_.begin(), members_.end(), pos);
}

std::optional<int> PreparedStats::position_of(const std::string& id) const {
  auto it = position_by_id_.find(id);
  if (it == position_by_id_.end()) return std::nullopt;
  return it->second;
}

int PreparedStats::reference_cutoff(int v) const {
  if (v < 1) throw Error(ErrorCode::invalid_input, "v must be >= 1");
  if (static_cast<int>(negative_positions_.size()) >= v) return negative_positions_[v - 1] - 1;
  return p();
}

IndexSet PreparedStats::resolve(std::span<const std::string> ids) const {
  std::vector<int> positions;
  positions.reserve(ids.size());
  for (const auto& id : ids) {
    if (auto pos = position_of(id)) {
      positions.push_back(*pos);
    } else if (was_dropped(id)) {
      throw Error(ErrorCode::dropped_id,
                  "id '" + id + "' had a zero statistic and was dropped during preprocessing");
    } else {
      throw Error(ErrorCode::unknown_id, "unknown id '" + id + "'");
    }
  }
  return IndexSet(std::move(positions));
}

std::vector<std::string> PreparedStats::ids_of(const IndexSet& set) const {
  std::vector<std::string> out;
  out.reserve(set.size());
  for (int pos : set) out.push_back(id_at(pos));
  return out;
}

RawStats PreparedStats::to_raw() const {
  std::vector<StatEntry> entries;
  entries.reserve(signs_.size());
  for (int pos = 1; pos <= p(); ++pos) entries.push_back({id_at(pos), signed_value(pos)});
  return RawStats(std::move(entries));
}

PreparedStats prepare(const RawStats& raw, TieBreak policy, std::optional<std::uint64_t> seed) {
  if (raw.size() == 0) throw Error(ErrorCode::invalid_input, "no statistics supplied");
  if (policy == TieBreak::seeded_random && !seed) {
    throw Error(ErrorCode::invalid_input, "seeded_random tie-break requires a seed");
  }
  const auto& entries = raw.entries();

  PreparedStats out;
  out.tie_break_ = policy;
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (entries[i].w == 0.0) {
      out.dropped_ids_.insert(entries[i].id);
    } else {
      order.push_back(i);
    }
  }
  if (order.empty()) {
    throw Error(ErrorCode::empty_after_preprocessing, "all statistics are zero");
  }

  if (policy == TieBreak::stable_by_input_order) {
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return std::abs(entries[a].w) > std::abs(entries[b].w);
    });
  } else {
    std::mt19937_64 gen(*seed);
    std::vector<std::uint64_t> key(entries.size());
    for (auto& k : key) k = gen();
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      double ma = std::abs(entries[a].w), mb = std::abs(entries[b].w);
      if (ma != mb) return ma > mb;
      if (key[a] != key[b]) return key[a] < key[b];
      return a < b;
    });
  }

  const std::size_t p = order.size();
  out.magnitudes_.reserve(p);
  out.signs_.reserve(p);
  out.ids_.reserve(p);
  out.pos_prefix_.reserve(p + 1);
  for (std::size_t r = 0; r < p; ++r) {
    const auto& e = entries[order[r]];
    const int pos = static_cast<int>(r) + 1;
    out.magnitudes_.push_back(std::abs(e.w));
    out.signs_.push_back(e.w > 0 ? 1 : -1);
    out.ids_.push_back(e.id);
    out.position_by_id_.emplace(e.id, pos);
    out.pos_prefix_.push_back(out.pos_prefix_.back() + (e.w > 0 ? 1 : 0));
    if (e.w < 0) out.negative_positions_.push_back(pos);
  }
  return out;
}

double threshold(const PreparedStats& stats, int v) {
  if (v < 1) throw Error(ErrorCode::invalid_input, "v must be >= 1");
  auto neg = stats.negative_positions();
  if (static_cast<int>(neg.size()) >= v) return stats.magnitudes()[neg[v - 1] - 1];
  return stats.magnitudes().back();
}

IndexSet reference_set(const PreparedStats& stats, int v) {
  const int cutoff = stats.reference_cutoff(v);
  std::vector<int> members;
  for (int pos = 1; pos <= cutoff; ++pos) {
    if (stats.positive(pos)) members.push_back(pos);
  }
  return IndexSet::from_sorted(std::move(members));
}

IndexSet nested_set(const PreparedStats& stats, int i) {
  if (i < 0 || i > stats.p()) throw Error(ErrorCode::invalid_input, "nested set index out of range");
  std::vector<int> members;
  members.reserve(stats.positives_upto(i));
  for (int pos = 1; pos <= i; ++pos) {
    if (stats.positive(pos)) members.push_back(pos);
  }
  return IndexSet::from_sorted(std::move(members));
}

std::vector<IndexSet> nested_sets(const PreparedStats& stats) {
  std::vector<IndexSet> out;
  out.reserve(stats.p());
  std::vector<int> members;
  for (int pos = 1; pos <= stats.p(); ++pos) {
    if (stats.positive(pos)) members.push_back(pos);
    out.push_back(IndexSet::from_sorted(members));
  }
  return out;
}

double fdp_hat(const PreparedStats& stats, int i) {
  if (i < 1 || i > stats.p()) throw Error(ErrorCode::invalid_input, "fdp_hat index out of range");
  const double numer = 1.0 + stats.negatives_upto(i);
  return numer / std::max(stats.positives_upto(i), 1);
}

IndexSet knockoff_filter_select(const PreparedStats& stats, double q) {
  for (int i = stats.p(); i >= 1; --i) {
    if (fdp_hat(stats, i) <= q) return nested_set(stats, i);
  }
  return {};
}

}  // namespace kfdp
