#include "peerchurn/types.hpp"

#include <algorithm>

#include "peerchurn/error.hpp"

namespace peerchurn {

int SubscriberTable::add(const std::string& id, int plan, CalMonth join) {
  if (index_.count(id)) throw Error("duplicate subscriber id: " + id);
  int idx = static_cast<int>(rows_.size());
  rows_.push_back(Row{id, plan, join});
  index_.emplace(id, idx);
  return idx;
}

int SubscriberTable::add_plan(const TariffPlan& p) {
  if (plan_index_.count(p.plan_id)) throw Error("duplicate plan id: " + p.plan_id);
  int idx = static_cast<int>(plans_.size());
  plans_.push_back(p);
  plan_index_.emplace(p.plan_id, idx);
  return idx;
}

std::vector<int> SubscriberTable::sorted_by_id() const {
  std::vector<int> order(rows_.size());
  for (std::size_t i = 0; i < rows_.size(); ++i) order[i] = static_cast<int>(i);
  std::sort(order.begin(), order.end(),
            [this](int a, int b) { return rows_[a].id < rows_[b].id; });
  return order;
}

SubscriberMonth& UsageTable::at(int sub, int month) {
  std::size_t cell = static_cast<std::size_t>(sub) * n_months_ + (month - 1);
  if (cells_[cell] < 0) {
    cells_[cell] = static_cast<int32_t>(rows_.size());
    rows_.push_back(SubscriberMonth{});
    rows_.back().sub = sub;
    rows_.back().month = month;
  }
  return rows_[static_cast<std::size_t>(cells_[cell])];
}

const SubscriberMonth* UsageTable::find(int sub, int month) const {
  if (sub < 0 || sub >= n_subs_ || month < 1 || month > n_months_) return nullptr;
  std::size_t cell = static_cast<std::size_t>(sub) * n_months_ + (month - 1);
  return cells_[cell] < 0 ? nullptr : &rows_[static_cast<std::size_t>(cells_[cell])];
}

void EdgeMonthTable::add_call(int a, int b, int month, int n) {
  uint64_t k = key(a, b);
  auto [it, inserted] = index_.try_emplace(k, static_cast<int32_t>(pairs_.size()));
  if (inserted) {
    Pair p;
    p.a = std::min(a, b);
    p.b = std::max(a, b);
    p.calls.assign(static_cast<std::size_t>(n_months_), 0);
    pairs_.push_back(std::move(p));
  }
  pairs_[static_cast<std::size_t>(it->second)].calls[static_cast<std::size_t>(month - 1)] +=
      n;
}

int EdgeMonthTable::calls_exchanged(int a, int b, int month) const {
  auto it = index_.find(key(a, b));
  if (it == index_.end()) return 0;
  if (month < 1 || month > n_months_) return 0;
  return pairs_[static_cast<std::size_t>(it->second)].calls[static_cast<std::size_t>(month - 1)];
}

}  // namespace peerchurn
