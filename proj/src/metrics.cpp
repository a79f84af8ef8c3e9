#include "dynscale/metrics.hpp"

#include <algorithm>
#include <fstream>
#include <map>

#include "dynscale/error.hpp"

namespace dynscale {

BudgetCurve accuracy_curve(std::span<const RunRecord> records)
{
    struct Acc {
        double accuracy = 0.0;
        double tokens = 0.0;
        int runs = 0;
    };
    std::map<std::int64_t, Acc> by_budget;
    for (const auto& r : records) {
        for (const auto& q : r.config.queries)
            if (!q.gold_answer)
                throw Error(ErrorCode::missing_gold, "query '" + q.id + "' in run '" + r.run_id + "' has no gold answer");
        int correct = 0;
        for (const auto& a : r.answers) correct += a.correctness == Correctness::correct;
        std::int64_t tokens = 0;
        for (const auto& s : r.samples) tokens += s.output_tokens;
        auto& acc = by_budget[r.config.total_samples];
        acc.accuracy += r.answers.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(r.answers.size());
        acc.tokens += static_cast<double>(tokens);
        acc.runs += 1;
    }
    BudgetCurve curve;
    for (const auto& [budget, acc] : by_budget)
        curve.points.push_back({budget, acc.tokens / acc.runs, acc.accuracy / acc.runs, acc.runs});
    return curve;
}

BudgetCurve smooth(const BudgetCurve& curve, int window)
{
    if (window < 1) throw Error(ErrorCode::invalid_config, "smoothing window must be >= 1");
    BudgetCurve out = curve;
    out.smoothing_window = window;
    const auto n = static_cast<std::ptrdiff_t>(curve.points.size());
    const std::ptrdiff_t left = (window - 1) / 2;
    const std::ptrdiff_t right = window / 2;
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        const auto lo = std::max<std::ptrdiff_t>(0, i - left);
        const auto hi = std::min<std::ptrdiff_t>(n - 1, i + right);
        double sum = 0.0;
        for (auto t = lo; t <= hi; ++t) sum += curve.points[static_cast<std::size_t>(t)].accuracy;
        out.points[static_cast<std::size_t>(i)].accuracy = sum / static_cast<double>(hi - lo + 1);
    }
    return out;
}

std::vector<AllocationRatePoint> effective_allocation_rate(const RunRecord& record)
{
    for (const auto& q : record.config.queries)
        if (!q.gold_answer) throw Error(ErrorCode::missing_gold, "query '" + q.id + "' has no gold answer");
    std::vector<AllocationRatePoint> out;
    int total_funded = 0;
    int total_incorrect = 0;
    for (const auto& round : record.ledger.rounds) {
        if (round.phase != RoundPhase::dynamic) continue;
        if (!round.correctness_snapshot)
            throw Error(ErrorCode::missing_gold, "round " + std::to_string(round.round_index) + " has no correctness snapshot");
        const auto& snap = *round.correctness_snapshot;
        AllocationRatePoint p;
        p.round_index = round.round_index;
        p.used_samples = round.used_samples;
        p.output_tokens = round.output_tokens;
        p.funded = static_cast<int>(round.selected.size());
        for (const auto& id : round.selected) {
            const auto it = snap.find(id);
            if (it == snap.end() || it->second == Correctness::unknown)
                throw Error(ErrorCode::missing_gold, "no correctness for query '" + id + "'");
            p.funded_incorrect += it->second == Correctness::incorrect;
        }
        int incorrect = 0;
        for (const auto& [id, c] : snap) incorrect += c == Correctness::incorrect;
        p.incorrect_fraction = snap.empty() ? 0.0 : static_cast<double>(incorrect) / static_cast<double>(snap.size());
        p.rate = p.funded > 0 ? static_cast<double>(p.funded_incorrect) / p.funded : 0.0;
        total_funded += p.funded;
        total_incorrect += p.funded_incorrect;
        p.cumulative_rate = total_funded > 0 ? static_cast<double>(total_incorrect) / total_funded : 0.0;
        out.push_back(p);
    }
    return out;
}

void write_curve_csv(const std::filesystem::path& path, const BudgetCurve& raw, const BudgetCurve& smoothed)
{
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::io_error, "cannot write '" + path.string() + "'");
    out.precision(17);
    out << "budget_samples,budget_tokens,accuracy,accuracy_smoothed,runs\n";
    for (std::size_t i = 0; i < raw.points.size(); ++i) {
        const auto& p = raw.points[i];
        const double s = i < smoothed.points.size() ? smoothed.points[i].accuracy : p.accuracy;
        out << p.budget_samples << ',' << p.budget_tokens << ',' << p.accuracy << ',' << s << ',' << p.runs << '\n';
    }
}

void write_allocation_rate_csv(const std::filesystem::path& path, const std::string& run_id,
                               const std::vector<AllocationRatePoint>& points, bool append)
{
    const bool fresh = !append || !std::filesystem::exists(path);
    std::ofstream out(path, append ? std::ios::app : std::ios::trunc);
    if (!out) throw Error(ErrorCode::io_error, "cannot write '" + path.string() + "'");
    out.precision(17);
    if (fresh)
        out << "run_id,round,used_samples,output_tokens,funded,funded_incorrect,incorrect_fraction,rate,cumulative_rate\n";
    for (const auto& p : points)
        out << run_id << ',' << p.round_index << ',' << p.used_samples << ',' << p.output_tokens << ',' << p.funded
            << ',' << p.funded_incorrect << ',' << p.incorrect_fraction << ',' << p.rate << ',' << p.cumulative_rate
            << '\n';
}

}  // namespace dynscale
