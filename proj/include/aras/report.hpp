#pragma once

#include "aras/simulator.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace aras
{

enum class Variant
{
    Naive,
    Base,
    B,
    BR,
    BRW,
};

/// Accepts naive, base (alias baseline), b, br, brw.
Variant parse_variant(const std::string& name);
const char* variant_flag(Variant v);
/// Report label: naive, ARAS, ARAS_B, ARAS_BR, ARAS_BRW.
const char* variant_label(Variant v);

struct RunOptions
{
    double clip_threshold = 0.001;
    std::vector<int> centers = default_centers();
};

struct RunOutput
{
    Schedule schedule;
    SimResult result;
};

/// Schedules, annotates and simulates one variant.
RunOutput run_variant(Variant v, const NetworkModel& network, const ValidatedConfig& config,
                      const RunOptions& options = {}, bool record_events = true);

struct RunReport
{
    std::string label;
    std::string network;
    std::string baseline;
    std::string write_latency_mode;
    Cycles lower_bound = 0;
    Metrics metrics;
    /// value / baseline value for the headline quantities.
    std::map<std::string, double> normalized;
    std::optional<ShiftPlan> shift;
    int guard_rejections = 0;

    double upper_bound_ratio() const
    {
        return metrics.makespan == 0 ? 0.0 : static_cast<double>(lower_bound) / static_cast<double>(metrics.makespan);
    }
};

RunReport make_report(const std::string& network_name, const Schedule& schedule, const Metrics& metrics,
                      Cycles lower_bound);

/// Fills normalized ratios of every report against the one labelled `baseline`.
void normalize_reports(std::vector<RunReport>& reports, const std::string& baseline);

/// Key-value sections: [run], [metrics], [normalized], [layer N], [histogram], [shift].
std::string format_report(const RunReport& report);
RunReport parse_report(const std::string& text);

std::string format_csv(const std::vector<RunReport>& reports);
std::string format_comparison_table(const std::vector<RunReport>& reports);

}  // namespace aras
