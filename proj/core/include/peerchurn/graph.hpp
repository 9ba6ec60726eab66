#pragma once

#include <string>
#include <vector>

#include "peerchurn/types.hpp"

namespace peerchurn {

// Friendship graph over subscriber indices. Friendship is symmetric: a pair
// qualifies iff they exchanged at least one call in *every* month both were
// present in the network, and were co-present for at least
// `min_coexist_months` months. frd(i) = friends(i).size(), computed across
// the whole window (time-independent by design).
struct FriendshipGraph {
  std::vector<std::vector<int>> friends;  // sorted adjacency per subscriber

  int frd(int sub) const { return static_cast<int>(friends[static_cast<std::size_t>(sub)].size()); }
  bool are_friends(int a, int b) const;
};

FriendshipGraph build_friendships(const EdgeMonthTable& edges, const Presence& presence,
                                  int min_coexist_months = 2);

// Sample trim: analysis egos must have 1 <= frd <= degree_cap. Friend sets
// themselves keep trimmed alters (a heavy hub may still be someone's friend;
// it is just not analyzed as an ego).
struct TrimResult {
  std::vector<int> retained;  // subscriber indices, ascending
  int removed_no_degree = 0;
  int removed_high_degree = 0;

  double retention_ratio(int total) const {
    return total ? static_cast<double>(retained.size()) / total : 0.0;
  }
};

TrimResult trim_sample(const FriendshipGraph& graph, int n_subs, int degree_cap = 50);

// Churner-friend exposure counts. count(ego, month, n) = number of ego's
// friends whose churn month is `month` and with calls_exchanged(ego, friend,
// month) >= n. The churn month is the friend's first silent month, so only
// the ego-side calls can exist in it. cumulative(ego, month, n) sums counts
// over months <= month.
class ChurnerFriendCounts {
 public:
  ChurnerFriendCounts(const FriendshipGraph& graph, const EdgeMonthTable& edges,
                      const ChurnTable& churn, const std::vector<int>& thresholds,
                      int n_months);

  int count(int ego, int month, int threshold) const;
  int cumulative(int ego, int month, int threshold) const;  // month 0 => 0
  const std::vector<int>& thresholds() const { return thresholds_; }

 private:
  int slot(int threshold) const;
  std::vector<int> thresholds_;
  int n_months_;
  // per ego: n_months * n_thresholds packed counts
  std::vector<std::vector<int16_t>> counts_;
};

void write_friendships_csv(const std::string& path, const FriendshipGraph& graph,
                           const SubscriberTable& subs);
void write_edge_months_csv(const std::string& path, const EdgeMonthTable& edges,
                           const SubscriberTable& subs);
FriendshipGraph read_friendships_csv(const std::string& path, const SubscriberTable& subs);
EdgeMonthTable read_edge_months_csv(const std::string& path, const SubscriberTable& subs,
                                    int n_months);

}  // namespace peerchurn
