#include "peerchurn/graph.hpp"

#include <algorithm>

#include "peerchurn/csv.hpp"
#include "peerchurn/error.hpp"

namespace peerchurn {

bool FriendshipGraph::are_friends(int a, int b) const {
  const auto& fa = friends[static_cast<std::size_t>(a)];
  return std::binary_search(fa.begin(), fa.end(), b);
}

FriendshipGraph build_friendships(const EdgeMonthTable& edges, const Presence& presence,
                                  int min_coexist_months) {
  FriendshipGraph g;
  g.friends.resize(presence.first.size());
  for (const auto& pair : edges.pairs()) {
    int lo = std::max(presence.first[static_cast<std::size_t>(pair.a)],
                      presence.first[static_cast<std::size_t>(pair.b)]);
    int hi = std::min(presence.last[static_cast<std::size_t>(pair.a)],
                      presence.last[static_cast<std::size_t>(pair.b)]);
    if (hi - lo + 1 < min_coexist_months) continue;
    bool every_month = true;
    for (int m = lo; m <= hi; ++m) {
      if (pair.calls[static_cast<std::size_t>(m - 1)] < 1) {
        every_month = false;
        break;
      }
    }
    if (!every_month) continue;
    g.friends[static_cast<std::size_t>(pair.a)].push_back(pair.b);
    g.friends[static_cast<std::size_t>(pair.b)].push_back(pair.a);
  }
  for (auto& adj : g.friends) std::sort(adj.begin(), adj.end());
  return g;
}

TrimResult trim_sample(const FriendshipGraph& graph, int n_subs, int degree_cap) {
  if (degree_cap < 1) throw Error("degree_cap must be >= 1");
  TrimResult r;
  for (int s = 0; s < n_subs; ++s) {
    int d = graph.frd(s);
    if (d == 0) {
      ++r.removed_no_degree;
    } else if (d > degree_cap) {
      ++r.removed_high_degree;
    } else {
      r.retained.push_back(s);
    }
  }
  return r;
}

ChurnerFriendCounts::ChurnerFriendCounts(const FriendshipGraph& graph,
                                         const EdgeMonthTable& edges, const ChurnTable& churn,
                                         const std::vector<int>& thresholds, int n_months)
    : thresholds_(thresholds), n_months_(n_months) {
  for (std::size_t i = 1; i < thresholds_.size(); ++i)
    if (thresholds_[i] <= thresholds_[i - 1])
      throw Error("thresholds must be strictly increasing");
  std::size_t n = graph.friends.size();
  counts_.assign(n, {});
  std::size_t stride = thresholds_.size();
  for (std::size_t ego = 0; ego < n; ++ego) {
    auto& vec = counts_[ego];
    vec.assign(static_cast<std::size_t>(n_months_) * stride, 0);
    for (int f : graph.friends[ego]) {
      const ChurnEvent& ev = churn.of(f);
      if (!ev.churned || ev.month < 1 || ev.month > n_months_) continue;
      int calls = edges.calls_exchanged(static_cast<int>(ego), f, ev.month);
      for (std::size_t t = 0; t < stride; ++t)
        if (calls >= thresholds_[t])
          ++vec[static_cast<std::size_t>(ev.month - 1) * stride + t];
    }
  }
}

int ChurnerFriendCounts::slot(int threshold) const {
  for (std::size_t i = 0; i < thresholds_.size(); ++i)
    if (thresholds_[i] == threshold) return static_cast<int>(i);
  throw Error("threshold " + std::to_string(threshold) + " was not precomputed");
}

int ChurnerFriendCounts::count(int ego, int month, int threshold) const {
  if (month < 1 || month > n_months_) return 0;
  int t = slot(threshold);
  return counts_[static_cast<std::size_t>(ego)]
                [static_cast<std::size_t>(month - 1) * thresholds_.size() +
                 static_cast<std::size_t>(t)];
}

int ChurnerFriendCounts::cumulative(int ego, int month, int threshold) const {
  int t = slot(threshold);
  int total = 0;
  int hi = std::min(month, n_months_);
  const auto& vec = counts_[static_cast<std::size_t>(ego)];
  for (int m = 1; m <= hi; ++m)
    total += vec[static_cast<std::size_t>(m - 1) * thresholds_.size() +
                 static_cast<std::size_t>(t)];
  return total;
}

void write_friendships_csv(const std::string& path, const FriendshipGraph& graph,
                           const SubscriberTable& subs) {
  CsvWriter w(path, {"subscriber_a", "subscriber_b"});
  // Emit each unordered pair once, ordered by id strings.
  std::vector<std::pair<std::string, std::string>> rows;
  for (std::size_t a = 0; a < graph.friends.size(); ++a) {
    for (int b : graph.friends[a]) {
      if (static_cast<int>(a) < b) {
        const std::string& ia = subs.row(static_cast<int>(a)).id;
        const std::string& ib = subs.row(b).id;
        rows.emplace_back(std::min(ia, ib), std::max(ia, ib));
      }
    }
  }
  std::sort(rows.begin(), rows.end());
  for (const auto& [a, b] : rows) w.raw_row(a + "," + b);
  w.close();
}

void write_edge_months_csv(const std::string& path, const EdgeMonthTable& edges,
                           const SubscriberTable& subs) {
  CsvWriter w(path, {"subscriber_a", "subscriber_b", "month", "calls_exchanged"});
  struct Row {
    std::string a, b;
    int month;
    int calls;
  };
  std::vector<Row> rows;
  for (const auto& pair : edges.pairs()) {
    const std::string& ia = subs.row(pair.a).id;
    const std::string& ib = subs.row(pair.b).id;
    for (int m = 1; m <= edges.n_months(); ++m) {
      int c = pair.calls[static_cast<std::size_t>(m - 1)];
      if (c > 0)
        rows.push_back(Row{std::min(ia, ib), std::max(ia, ib), m, c});
    }
  }
  std::sort(rows.begin(), rows.end(), [](const Row& x, const Row& y) {
    if (x.a != y.a) return x.a < y.a;
    if (x.b != y.b) return x.b < y.b;
    return x.month < y.month;
  });
  for (const auto& r : rows)
    w.raw_row(r.a + "," + r.b + "," + std::to_string(r.month) + "," + std::to_string(r.calls));
  w.close();
}

FriendshipGraph read_friendships_csv(const std::string& path, const SubscriberTable& subs) {
  FriendshipGraph g;
  g.friends.resize(static_cast<std::size_t>(subs.size()));
  CsvReader r(path, {"subscriber_a", "subscriber_b"});
  std::vector<std::string> f;
  while (r.next(f)) {
    if (f.size() != 2)
      throw Error(path + ":" + std::to_string(r.line_number()) + ": expected 2 fields");
    int a = subs.find(f[0]), b = subs.find(f[1]);
    if (a < 0 || b < 0)
      throw Error(path + ":" + std::to_string(r.line_number()) + ": unknown subscriber");
    if (a == b) throw Error(path + ":" + std::to_string(r.line_number()) + ": self-pair");
    g.friends[static_cast<std::size_t>(a)].push_back(b);
    g.friends[static_cast<std::size_t>(b)].push_back(a);
  }
  for (auto& v : g.friends) std::sort(v.begin(), v.end());
  return g;
}

EdgeMonthTable read_edge_months_csv(const std::string& path, const SubscriberTable& subs,
                                    int n_months) {
  EdgeMonthTable t(n_months);
  CsvReader r(path, {"subscriber_a", "subscriber_b", "month", "calls_exchanged"});
  std::vector<std::string> f;
  while (r.next(f)) {
    if (f.size() != 4)
      throw Error(path + ":" + std::to_string(r.line_number()) + ": expected 4 fields");
    int a = subs.find(f[0]), b = subs.find(f[1]);
    if (a < 0 || b < 0)
      throw Error(path + ":" + std::to_string(r.line_number()) + ": unknown subscriber");
    int month = std::stoi(f[2]);
    int calls = std::stoi(f[3]);
    if (month < 1 || month > n_months)
      throw Error(path + ":" + std::to_string(r.line_number()) + ": month out of window");
    if (calls <= 0)
      throw Error(path + ":" + std::to_string(r.line_number()) + ": non-positive call count");
    t.add_call(a, b, month, calls);
  }
  return t;
}

}  // namespace peerchurn
