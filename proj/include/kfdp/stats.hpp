#pragma once

// Knockoff statistic ingestion and the elementary quantities derived from a
// |W|-sorted sign sequence: thresholds, reference sets, nested sets and the
// knockoff FDP estimate.
//
// Positions are 1-based everywhere in the public API. Position 1 holds the
// largest |W|.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace kfdp {

struct StatEntry {
  std::string id;
  double w = 0.0;
};

// Validated input vector: finite values, unique ids, at least one entry.
class RawStats {
 public:
  RawStats() = default;
  explicit RawStats(std::vector<StatEntry> entries);

  const std::vector<StatEntry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }

 private:
  std::vector<StatEntry> entries_;
};

enum class TieBreak { stable_by_input_order, seeded_random };

// Sorted set of 1-based positions.
class IndexSet {
 public:
  IndexSet() = default;
  // Sorts and deduplicates; positions must be >= 1.
  explicit IndexSet(std::vector<int> members);
  static IndexSet from_sorted(std::vector<int> members);

  const std::vector<int>& members() const { return members_; }
  std::size_t size() const { return members_.size(); }
  bool empty() const { return members_.empty(); }
  bool contains(int pos) const;

  auto begin() const { return members_.begin(); }
  auto end() const { return members_.end(); }

  friend bool operator==(const IndexSet&, const IndexSet&) = default;

 private:
  std::vector<int> members_;
};

class PreparedStats {
 public:
  int p() const { return static_cast<int>(signs_.size()); }

  // Non-increasing; ties keep the order chosen by the tie-break policy.
  std::span<const double> magnitudes() const { return magnitudes_; }
  std::span<const std::int8_t> signs() const { return signs_; }
  bool positive(int pos) const { return signs_[pos - 1] > 0; }
  double signed_value(int pos) const { return signs_[pos - 1] * magnitudes_[pos - 1]; }

  const std::string& id_at(int pos) const { return ids_[pos - 1]; }
  std::optional<int> position_of(const std::string& id) const;
  bool was_dropped(const std::string& id) const { return dropped_ids_.contains(id); }

  int dropped_zero_count() const { return static_cast<int>(dropped_ids_.size()); }
  TieBreak tie_break() const { return tie_break_; }

  // Number of positive (resp. negative) signs among positions 1..i.
  int positives_upto(int i) const { return pos_prefix_[i]; }
  int negatives_upto(int i) const { return i - pos_prefix_[i]; }
  int positive_count() const { return pos_prefix_.back(); }

  // Positions of negative signs in increasing order.
  std::span<const int> negative_positions() const { return negative_positions_; }

  // Largest position c such that S(v) = {positives at positions <= c}.
  int reference_cutoff(int v) const;

  // Maps original ids to positions, erroring on dropped or unknown ids.
  IndexSet resolve(std::span<const std::string> ids) const;
  std::vector<std::string> ids_of(const IndexSet& set) const;

  // Re-expresses the retained entries in position order.
  RawStats to_raw() const;

 private:
  friend PreparedStats prepare(const RawStats&, TieBreak, std::optional<std::uint64_t>);

  std::vector<double> magnitudes_;
  std::vector<std::int8_t> signs_;
  std::vector<std::string> ids_;
  std::unordered_map<std::string, int> position_by_id_;
  std::unordered_set<std::string> dropped_ids_;
  TieBreak tie_break_ = TieBreak::stable_by_input_order;
  std::vector<int> pos_prefix_{0};
  std::vector<int> negative_positions_;
};

PreparedStats prepare(const RawStats& raw,
                      TieBreak policy = TieBreak::stable_by_input_order,
                      std::optional<std::uint64_t> seed = std::nullopt);

// T(v): magnitude of the v-th negative in |W| order, or min |W| when fewer
// than v negatives exist.
double threshold(const PreparedStats& stats, int v);

// S(v) = {i : W_i >= T(v)}.
IndexSet reference_set(const PreparedStats& stats, int v);

// R_i = {j <= i : W_j > 0}, i = 1..p.
std::vector<IndexSet> nested_sets(const PreparedStats& stats);
IndexSet nested_set(const PreparedStats& stats, int i);

double fdp_hat(const PreparedStats& stats, int i);

// Largest R_i with fdp_hat(i) <= q; empty when none qualifies.
IndexSet knockoff_filter_select(const PreparedStats& stats, double q);

}  // namespace kfdp
