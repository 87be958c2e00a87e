#include "mhop/metrics.hpp"

#include <algorithm>
#include <cstdlib>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace mhop::metrics {

bool topk(std::span<const double> logits, int label, int k) {
  if (label < 0 || static_cast<std::size_t>(label) >= logits.size()) throw std::out_of_range("topk: label");
  const double v = logits[static_cast<std::size_t>(label)];
  int ahead = 0;
  for (std::size_t c = 0; c < logits.size(); ++c) {
    if (logits[c] > v || (logits[c] == v && static_cast<int>(c) < label)) ++ahead;
  }
  return ahead < k;
}

int grid_l1(int a, int b) {
  if (a < 0 || a >= 36 || b < 0 || b >= 36) throw std::out_of_range("grid_l1: class outside 0..35");
  return std::abs(a / 6 - b / 6) + std::abs(a % 6 - b % 6);
}

double random_l1_expectation() {
  double per_axis = 0.0;
  for (int d = 1; d <= 5; ++d) per_axis += 2.0 * d * (6 - d);
  return 2.0 * per_axis / 36.0;
}

EvalReport summarize(const std::vector<EvalRecord>& records, int T) {
  EvalReport r;
  r.n = records.size();
  r.per_bin.assign(static_cast<std::size_t>(T), {});
  r.hop_bins = {{"1"}, {"2"}, {"3"}, {"4"}, {">=5"}};
  r.attendance.assign(static_cast<std::size_t>(T), std::vector<int>(static_cast<std::size_t>(T), 0));
  int top1 = 0, top5 = 0, hop2_next = 0;
  long l1 = 0, hops = 0, traced = 0;
  auto hop_bin = [](int c) { return static_cast<std::size_t>(std::clamp(c, 1, 5) - 1); };
  for (const auto& rec : records) {
    const int pred = static_cast<int>(std::max_element(rec.logits.begin(), rec.logits.end()) - rec.logits.begin());
    const bool t1 = topk(rec.logits, rec.label, 1);
    top1 += t1;
    top5 += topk(rec.logits, rec.label, 5);
    l1 += grid_l1(pred, rec.label);
    if (rec.bin >= 0 && rec.bin < T) {
      auto& b = r.per_bin[static_cast<std::size_t>(rec.bin)];
      ++b.count;
      b.top1_correct += t1;
    }
    if (rec.required_hops <= 0 || rec.hop_frames.empty()) continue;
    ++traced;
    const int count = static_cast<int>(rec.hop_frames.size());
    hops += count;
    const auto g = hop_bin(rec.required_hops);
    const auto p = hop_bin(count);
    ++r.hop_bins[g].gt;
    ++r.hop_bins[p].predicted;
    if (g == p) ++r.hop_bins[g].both;
    for (std::size_t h = 0; h < rec.hop_frames.size() && h < r.attendance.size(); ++h) {
      const int f = rec.hop_frames[h];
      if (f >= 0 && f < T) ++r.attendance[h][static_cast<std::size_t>(f)];
    }
    if (count >= 2) {
      ++r.hop2_episodes;
      hop2_next += rec.hop_frames[1] == rec.hop_frames[0] + 1;
    }
  }
  if (r.n > 0) {
    r.top1 = 100.0 * top1 / static_cast<double>(r.n);
    r.top5 = 100.0 * top5 / static_cast<double>(r.n);
    r.l1 = static_cast<double>(l1) / static_cast<double>(r.n);
  }
  for (auto& b : r.per_bin) b.top1 = b.count ? 100.0 * b.top1_correct / b.count : 0.0;
  for (auto& b : r.hop_bins) {
    const int uni = b.gt + b.predicted - b.both;
    b.jaccard = uni == 0 ? 1.0 : static_cast<double>(b.both) / uni;
  }
  if (traced > 0) r.mean_hops = static_cast<double>(hops) / static_cast<double>(traced);
  if (r.hop2_episodes > 0) r.hop2_next_frame_rate = static_cast<double>(hop2_next) / r.hop2_episodes;
  return r;
}

std::string EvalReport::to_json() const {
  nlohmann::ordered_json j;
  j["n"] = n;
  j["top1"] = top1;
  j["top5"] = top5;
  j["l1"] = l1;
  auto bins = nlohmann::ordered_json::array();
  for (std::size_t b = 0; b < per_bin.size(); ++b) {
    bins.push_back({{"last_visible", b}, {"count", per_bin[b].count}, {"correct", per_bin[b].top1_correct},
                    {"top1", per_bin[b].top1}});
  }
  j["per_bin"] = std::move(bins);
  auto hb = nlohmann::ordered_json::array();
  for (const auto& b : hop_bins) {
    hb.push_back({{"hops", b.name}, {"gt", b.gt}, {"predicted", b.predicted}, {"both", b.both}, {"jaccard", b.jaccard}});
  }
  j["hop_bins"] = std::move(hb);
  j["attendance"] = attendance;
  j["mean_hops"] = mean_hops;
  j["hop2_episodes"] = hop2_episodes;
  j["hop2_next_frame_rate"] = hop2_next_frame_rate;
  return j.dump(2);
}

std::string EvalReport::per_bin_csv() const {
  std::ostringstream os;
  os << "last_visible,count,correct,top1\n";
  for (std::size_t b = 0; b < per_bin.size(); ++b) {
    os << b << ',' << per_bin[b].count << ',' << per_bin[b].top1_correct << ',' << per_bin[b].top1 << '\n';
  }
  return os.str();
}

std::string EvalReport::attendance_csv() const {
  std::ostringstream os;
  os << "hop";
  for (std::size_t f = 0; f < (attendance.empty() ? 0 : attendance[0].size()); ++f) os << ",frame" << f;
  os << '\n';
  for (std::size_t h = 0; h < attendance.size(); ++h) {
    os << h + 1;
    for (int c : attendance[h]) os << ',' << c;
    os << '\n';
  }
  return os.str();
}

std::vector<EvalRecord> evaluate(const ReasoningModel& model, const std::vector<data::Sample>& samples,
                                 std::vector<mht::HopTrace>* traces) {
  std::vector<EvalRecord> out;
  out.reserve(samples.size());
  for (const auto& s : samples) {
    auto [logits, trace] = model.predict(s);
    EvalRecord r;
    r.logits = std::move(logits);
    r.label = s.label;
    r.bin = s.bin;
    r.required_hops = s.required_hops;
    for (const auto& h : trace.hops) r.hop_frames.push_back(h.frame);
    out.push_back(std::move(r));
    if (traces) traces->push_back(std::move(trace));
  }
  return out;
}

std::vector<EvalRecord> evaluate_last_frame(const ReasoningModel& model, const std::vector<data::Sample>& samples) {
  std::vector<EvalRecord> out;
  out.reserve(samples.size());
  for (const auto& s : samples) {
    EvalRecord r;
    r.logits = model.predict(data::last_frame_view(s)).first;
    r.label = s.label;
    r.bin = s.bin;
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<EvalRecord> evaluate_tracking(const std::vector<data::Sample>& samples) {
  std::vector<EvalRecord> out;
  for (const auto& s : samples) {
    EvalRecord r;
    r.logits.assign(kGridClasses, 0.0);
    r.logits[static_cast<std::size_t>(s.tracking_prediction)] = 1.0;
    r.label = s.label;
    r.bin = s.bin;
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace mhop::metrics
