#include "aras/weight_reuse.hpp"

#include <fmt/core.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>

namespace aras
{

WeightHistogram weight_histogram(const QuantizedWeights& weights)
{
    WeightHistogram h{};
    for (std::uint8_t v : weights.values)
        ++h[v];
    return h;
}

CellDistribution cell_distribution(const WeightHistogram& hist, const ValidatedConfig& config)
{
    const int cpw = config.cells_per_weight();
    const int bpc = config->bits_per_cell;
    const int levels = config.cell_levels();
    std::uint64_t total = 0;
    for (std::uint64_t c : hist)
        total += c;
    if (total == 0)
        throw Error("cell distribution of an empty weight tensor");

    std::vector<std::vector<std::uint64_t>> counts(cpw, std::vector<std::uint64_t>(levels, 0));
    for (int w = 0; w < static_cast<int>(hist.size()); ++w)
    {
        if (hist[w] == 0)
            continue;
        for (int t = 0; t < cpw; ++t)
            counts[t][(w >> (bpc * t)) & (levels - 1)] += hist[w];
    }
    CellDistribution d;
    d.levels = levels;
    d.p.assign(cpw, std::vector<double>(levels, 0.0));
    for (int t = 0; t < cpw; ++t)
        for (int k = 0; k < levels; ++k)
            d.p[t][k] = static_cast<double>(counts[t][k]) / static_cast<double>(total);
    return d;
}

CellDistribution cell_distribution(const QuantizedWeights& weights, const ValidatedConfig& config)
{
    if (weights.values.empty())
        throw Error(fmt::format("layer {}: cell distribution of an empty weight tensor", weights.layer_id));
    return cell_distribution(weight_histogram(weights), config);
}

double skipping_ratio(const CellDistribution& x, const CellDistribution& y, int position)
{
    if (x.levels != y.levels)
        throw Error("skipping ratio of distributions over different cell alphabets");
    if (position < 1 || position > x.positions() || position > y.positions())
        throw Error(fmt::format("cell position {} out of range", position));
    const auto& px = x.p[position - 1];
    const auto& py = y.p[position - 1];
    double s = 0.0;
    for (int k = 0; k < x.levels; ++k)
        s += px[k] * py[k];
    return s;
}

ShiftResult shift_weights(const QuantizedWeights& weights, int center, int weight_bits)
{
    const int max_w = (1 << weight_bits) - 1;
    if (center < 0 || center > max_w)
        throw Error(fmt::format("center {} out of range [0, {}]", center, max_w));
    ShiftResult r;
    r.weights = weights;
    if (weights.values.empty())
        return r;
    double sum = 0.0;
    for (std::uint8_t v : weights.values)
        sum += v;
    const double mean = sum / static_cast<double>(weights.values.size());
    r.offset = static_cast<int>(std::lround(center - mean));
    std::uint64_t clipped = 0;
    std::uint64_t err = 0;
    for (std::uint8_t& v : r.weights.values)
    {
        const int raw = v + r.offset;
        const int c = std::clamp(raw, 0, max_w);
        if (c != raw)
        {
            ++clipped;
            err += static_cast<std::uint64_t>(std::abs(raw - c));
        }
        v = static_cast<std::uint8_t>(c);
    }
    const double n = static_cast<double>(weights.values.size());
    r.clip_fraction = static_cast<double>(clipped) / n;
    r.mean_abs_clip_error = static_cast<double>(err) / n;
    return r;
}

namespace
{

struct HistShift
{
    WeightHistogram hist{};
    LayerShift shift;
};

HistShift shift_histogram(const WeightHistogram& h, int center, int weight_bits, int zero_point, bool first)
{
    const int max_w = (1 << weight_bits) - 1;
    std::uint64_t n = 0;
    double sum = 0.0;
    for (int v = 0; v < 256; ++v)
    {
        n += h[v];
        sum += static_cast<double>(v) * static_cast<double>(h[v]);
    }
    HistShift out;
    out.shift.offset = (first || n == 0) ? 0 : static_cast<int>(std::lround(center - sum / static_cast<double>(n)));
    std::uint64_t clipped = 0;
    std::uint64_t err = 0;
    for (int v = 0; v < 256; ++v)
    {
        if (h[v] == 0)
            continue;
        const int raw = v + out.shift.offset;
        const int c = std::clamp(raw, 0, max_w);
        if (c != raw)
        {
            clipped += h[v];
            err += static_cast<std::uint64_t>(std::abs(raw - c)) * h[v];
        }
        out.hist[c] += h[v];
    }
    if (n > 0)
    {
        out.shift.clip_fraction = static_cast<double>(clipped) / static_cast<double>(n);
        out.shift.mean_abs_clip_error = static_cast<double>(err) / static_cast<double>(n);
    }
    out.shift.adjusted_zero_point = zero_point - out.shift.offset;
    return out;
}

double pair_score(const CellDistribution& x, const CellDistribution& y)
{
    const int top = x.positions();
    if (top == 1)
        return skipping_ratio(x, y, 1);
    return 0.5 * (skipping_ratio(x, y, top - 1) + skipping_ratio(x, y, top));
}

double mean_pair_score(const std::vector<CellDistribution>& dists)
{
    if (dists.size() < 2)
        return 0.0;
    double s = 0.0;
    for (std::size_t l = 0; l + 1 < dists.size(); ++l)
        s += pair_score(dists[l], dists[l + 1]);
    return s / static_cast<double>(dists.size() - 1);
}

}  // namespace

CenterEvaluation evaluate_center(const NetworkModel& network, const ValidatedConfig& config, int center,
                                 std::vector<LayerShift>* shifts)
{
    const int max_w = (1 << network.weight_bits) - 1;
    if (center < 0 || center > max_w)
        throw Error(fmt::format("center {} out of range [0, {}]", center, max_w));
    CenterEvaluation e;
    e.center = center;
    std::vector<CellDistribution> dists;
    dists.reserve(network.layers.size());
    if (shifts)
        shifts->clear();
    for (std::size_t l = 0; l < network.layers.size(); ++l)
    {
        const Layer& layer = network.layers[l];
        const HistShift hs = shift_histogram(weight_histogram(layer.weights), center, network.weight_bits,
                                             layer.quant.weight_zero_point, l == 0);
        dists.push_back(cell_distribution(hs.hist, config));
        e.worst_clip_fraction = std::max(e.worst_clip_fraction, hs.shift.clip_fraction);
        e.total_clip_fraction += hs.shift.clip_fraction;
        if (shifts)
            shifts->push_back(hs.shift);
    }
    e.score = mean_pair_score(dists);
    return e;
}

double unshifted_score(const NetworkModel& network, const ValidatedConfig& config)
{
    std::vector<CellDistribution> dists;
    for (const Layer& layer : network.layers)
        dists.push_back(cell_distribution(layer.weights, config));
    return mean_pair_score(dists);
}

ShiftPlan select_center(const NetworkModel& network, const ValidatedConfig& config, double clip_threshold,
                        const std::vector<int>& centers)
{
    if (network.layers.size() < 2)
        throw Error("center selection needs at least two layers");
    if (centers.empty())
        throw Error("center selection needs at least one candidate");
    ShiftPlan plan;
    int best = -1;
    std::vector<LayerShift> best_shifts;
    for (int c : centers)
    {
        std::vector<LayerShift> shifts;
        CenterEvaluation e = evaluate_center(network, config, c, &shifts);
        e.survived = e.worst_clip_fraction <= clip_threshold;
        plan.evaluations.push_back(e);
        if (!e.survived)
            continue;
        bool better = best < 0;
        if (!better)
        {
            const CenterEvaluation& b = plan.evaluations[best];
            if (e.score != b.score)
                better = e.score > b.score;
            else if (e.total_clip_fraction != b.total_clip_fraction)
                better = e.total_clip_fraction < b.total_clip_fraction;
            else
                better = e.center < b.center;
        }
        if (better)
        {
            best = static_cast<int>(plan.evaluations.size()) - 1;
            best_shifts = std::move(shifts);
        }
    }
    if (best < 0)
    {
        plan.fallback = true;
        plan.center = 0;
        for (const Layer& layer : network.layers)
        {
            LayerShift s;
            s.adjusted_zero_point = layer.quant.weight_zero_point;
            plan.layers.push_back(s);
        }
        return plan;
    }
    plan.center = plan.evaluations[best].center;
    plan.layers = std::move(best_shifts);
    return plan;
}

CellDeltaMatrix compute_cell_deltas(const std::vector<std::uint8_t>& old_cells, const std::vector<std::uint8_t>& new_cells,
                                    int rows, int cols)
{
    const std::size_t n = static_cast<std::size_t>(rows) * cols;
    if (old_cells.size() != n || new_cells.size() != n)
        throw Error("cell delta of images with mismatched geometry");
    CellDeltaMatrix d;
    d.rows = rows;
    d.cols = cols;
    d.delta.resize(n);
    d.max_increase.assign(rows, 0);
    d.max_decrease.assign(rows, 0);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c)
        {
            const std::size_t i = static_cast<std::size_t>(r) * cols + c;
            const int delta = static_cast<int>(new_cells[i]) - static_cast<int>(old_cells[i]);
            d.delta[i] = static_cast<std::int8_t>(delta);
            if (delta > d.max_increase[r])
                d.max_increase[r] = delta;
            if (-delta > d.max_decrease[r])
                d.max_decrease[r] = -delta;
        }
    return d;
}

CellDeltaMatrix compute_cell_deltas(const CellImage& old_image, const CellImage& new_image)
{
    if (old_image.rows != new_image.rows || old_image.cols != new_image.cols)
        throw Error("cell delta of images with mismatched geometry");
    CellDeltaMatrix d;
    if (old_image.occupant)
        d = compute_cell_deltas(old_image.cells, new_image.cells, new_image.rows, new_image.cols);
    else
        d = compute_cell_deltas(std::vector<std::uint8_t>(new_image.cells.size(), 0), new_image.cells, new_image.rows,
                                new_image.cols);
    d.coord = new_image.coord;
    return d;
}

std::uint64_t total_pulses(const CellDeltaMatrix& deltas)
{
    std::uint64_t s = 0;
    for (std::int8_t v : deltas.delta)
        s += static_cast<std::uint64_t>(v < 0 ? -v : v);
    return s;
}

namespace
{

double bias_of(const QuantParams& qp, int channel)
{
    if (qp.bias.empty())
        return 0.0;
    if (channel < 0 || channel >= static_cast<int>(qp.bias.size()))
        throw Error(fmt::format("bias channel {} out of range", channel));
    return qp.bias[channel];
}

}  // namespace

DotProduct compensated_dot_product(std::span<const int> x_q, std::span<const int> w_shifted, int offset,
                                   const QuantParams& qp, int channel)
{
    if (x_q.size() != w_shifted.size())
        throw Error(fmt::format("dot product length mismatch: {} vs {}", x_q.size(), w_shifted.size()));
    const std::int64_t zp_adj = static_cast<std::int64_t>(qp.weight_zero_point) - offset;
    DotProduct r;
    for (std::size_t i = 0; i < x_q.size(); ++i)
        r.accumulation += (static_cast<std::int64_t>(x_q[i]) + qp.act_zero_point) * (w_shifted[i] + zp_adj);
    r.value = static_cast<double>(r.accumulation) / (qp.act_scale * qp.weight_scale) + bias_of(qp, channel);
    return r;
}

DotProduct reference_dot_product(std::span<const int> x_q, std::span<const int> w_q, const QuantParams& qp,
                                 int channel)
{
    if (x_q.size() != w_q.size())
        throw Error(fmt::format("dot product length mismatch: {} vs {}", x_q.size(), w_q.size()));
    DotProduct r;
    for (std::size_t i = 0; i < x_q.size(); ++i)
        r.accumulation += (static_cast<std::int64_t>(x_q[i]) + qp.act_zero_point) *
                          (static_cast<std::int64_t>(w_q[i]) + qp.weight_zero_point);
    r.value = static_cast<double>(r.accumulation) / (qp.act_scale * qp.weight_scale) + bias_of(qp, channel);
    return r;
}

}  // namespace aras
