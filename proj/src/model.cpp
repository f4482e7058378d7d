#include "aras/model.hpp"

#include <fmt/core.h>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

namespace aras
{

using json = nlohmann::json;

ConfigError::ConfigError(std::string field, const std::string& what)
    : Error(fmt::format("invalid config field '{}': {}", field, what))
    , field_(std::move(field))
{}

const char* to_string(LayerKind kind)
{
    return kind == LayerKind::Conv ? "CONV" : "FC";
}

const char* to_string(WriteLatencyMode mode)
{
    return mode == WriteLatencyMode::WorstCase ? "worst-case" : "delta";
}

int LayerDescriptor::output_h() const
{
    return (input_h + 2 * padding - kernel_h) / stride + 1;
}

int LayerDescriptor::output_w() const
{
    return (input_w + 2 * padding - kernel_w) / stride + 1;
}

std::uint64_t LayerDescriptor::weight_count() const
{
    return static_cast<std::uint64_t>(out_channels) * unrolled_length();
}

std::uint64_t LayerDescriptor::unrolled_length() const
{
    return static_cast<std::uint64_t>(kernel_h) * kernel_w * in_channels;
}

void validate_descriptor(const LayerDescriptor& l)
{
    auto fail = [&](const std::string& msg) {
        throw NetworkError(fmt::format("layer {}: {}", l.id, msg));
    };
    if (l.kernel_h < 1 || l.kernel_w < 1)
        fail("kernel dimensions must be positive");
    if (l.in_channels < 1 || l.out_channels < 1)
        fail("channel counts must be positive");
    if (l.input_h < 1 || l.input_w < 1)
        fail("input dimensions must be positive");
    if (l.stride < 1)
        fail("stride must be positive");
    if (l.padding < 0)
        fail("padding must be nonnegative");
    if (l.input_h + 2 * l.padding < l.kernel_h || l.input_w + 2 * l.padding < l.kernel_w)
        fail("kernel larger than padded input");
    if (l.output_h() < 1 || l.output_w() < 1)
        fail("output dimensions must be positive");
    if (l.kind == LayerKind::FC &&
        (l.kernel_h != 1 || l.kernel_w != 1 || l.input_h != 1 || l.input_w != 1 || l.padding != 0))
        fail("FC layers must use a 1x1 kernel on a 1x1 input");
}

void validate_network(const NetworkModel& net)
{
    if (net.layers.empty())
        throw NetworkError("empty network");
    if (net.weight_bits < 1 || net.weight_bits > 8)
        throw NetworkError(fmt::format("weight_bits {} outside supported range 1..8", net.weight_bits));
    const int max_value = (1 << net.weight_bits) - 1;
    for (std::size_t i = 0; i < net.layers.size(); ++i)
    {
        const Layer& layer = net.layers[i];
        const LayerDescriptor& d = layer.desc;
        if (d.id != static_cast<int>(i))
            throw NetworkError(fmt::format("layer ids must be contiguous from 0; found {} at position {}", d.id, i));
        validate_descriptor(d);
        const QuantizedWeights& w = layer.weights;
        if (w.out_channels != d.out_channels || w.in_channels != d.in_channels || w.kernel_h != d.kernel_h ||
            w.kernel_w != d.kernel_w || w.values.size() != d.weight_count())
            throw NetworkError(fmt::format("layer {}: weight tensor shape does not match descriptor", d.id));
        for (std::uint8_t v : w.values)
            if (v > max_value)
                throw NetworkError(fmt::format("layer {}: weight value {} out of range [0, {}]", d.id, v, max_value));
        const QuantParams& q = layer.quant;
        if (!(q.weight_scale > 0.0) || !(q.act_scale > 0.0))
            throw NetworkError(fmt::format("layer {}: quantization scales must be positive", d.id));
        if (q.weight_bits != net.weight_bits)
            throw NetworkError(fmt::format("layer {}: weight_bits differs from network", d.id));
        if (!q.bias.empty() && q.bias.size() != static_cast<std::size_t>(d.out_channels))
            throw NetworkError(fmt::format("layer {}: bias length must equal out_channels", d.id));
    }
}

namespace
{

std::string lower(std::string s)
{
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

std::pair<int, int> read_pair(const json& j, const char* key, std::pair<int, int> fallback)
{
    if (!j.contains(key))
        return fallback;
    const json& v = j.at(key);
    if (v.is_number_integer())
        return {v.get<int>(), v.get<int>()};
    if (!v.is_array() || v.size() != 2)
        throw NetworkError(fmt::format("'{}' must be an integer or a [h, w] pair", key));
    return {v[0].get<int>(), v[1].get<int>()};
}

std::vector<std::uint8_t> read_weight_values(const json& spec, const LayerDescriptor& d, int bits,
                                             const std::filesystem::path& base_dir, const LoadOptions& options)
{
    const std::size_t count = d.weight_count();
    const int max_value = (1 << bits) - 1;
    std::vector<std::uint8_t> out;
    out.reserve(count);

    if (spec.contains("values"))
    {
        for (const json& v : spec.at("values"))
        {
            const long long x = v.get<long long>();
            if (x < 0 || x > max_value)
                throw NetworkError(fmt::format("layer {}: weight value {} out of range [0, {}]", d.id, x, max_value));
            out.push_back(static_cast<std::uint8_t>(x));
        }
    }
    else if (spec.contains("file"))
    {
        const std::filesystem::path file = base_dir / spec.at("file").get<std::string>();
        std::ifstream in(file, std::ios::binary);
        if (!in)
            throw NetworkError(fmt::format("layer {}: cannot open weight file {}", d.id, file.string()));
        out.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
        for (std::uint8_t v : out)
            if (v > max_value)
                throw NetworkError(fmt::format("layer {}: weight value {} out of range [0, {}]", d.id, v, max_value));
    }
    else if (spec.contains("generator"))
    {
        const json& g = spec.at("generator");
        const std::string kind = lower(g.value("kind", "gaussian"));
        std::mt19937_64 rng(g.value("seed", std::uint64_t{0}) + options.seed_offset);
        auto clamp_round = [&](double x) {
            const double r = std::clamp(std::round(x), 0.0, static_cast<double>(max_value));
            return static_cast<std::uint8_t>(r);
        };
        if (kind == "gaussian")
        {
            std::normal_distribution<double> dist(g.value("mean", max_value / 2.0), g.value("std", 16.0));
            for (std::size_t i = 0; i < count; ++i)
                out.push_back(clamp_round(dist(rng)));
        }
        else if (kind == "uniform")
        {
            std::uniform_int_distribution<int> dist(g.value("low", 0), g.value("high", max_value));
            for (std::size_t i = 0; i < count; ++i)
                out.push_back(clamp_round(dist(rng)));
        }
        else if (kind == "constant")
        {
            out.assign(count, clamp_round(g.value("value", 0.0)));
        }
        else
        {
            throw NetworkError(fmt::format("layer {}: unknown weight generator '{}'", d.id, kind));
        }
    }
    else
    {
        throw NetworkError(fmt::format("layer {}: weights need 'values', 'file' or 'generator'", d.id));
    }

    if (out.size() != count)
        throw NetworkError(fmt::format("layer {}: weight tensor has {} values, descriptor needs {}", d.id, out.size(),
                                       count));
    return out;
}

Layer parse_layer(const json& j, int bits, const std::filesystem::path& base_dir, const LoadOptions& options)
{
    Layer layer;
    LayerDescriptor& d = layer.desc;
    d.id = j.at("id").get<int>();
    const std::string kind = lower(j.value("kind", "conv"));
    if (kind == "conv")
        d.kind = LayerKind::Conv;
    else if (kind == "fc")
        d.kind = LayerKind::FC;
    else
        throw NetworkError(fmt::format("layer {}: unknown kind '{}'", d.id, kind));
    std::tie(d.kernel_h, d.kernel_w) = read_pair(j, "kernel", {1, 1});
    std::tie(d.input_h, d.input_w) = read_pair(j, "input", {1, 1});
    d.in_channels = j.at("in_channels").get<int>();
    d.out_channels = j.at("out_channels").get<int>();
    d.stride = j.value("stride", 1);
    d.padding = j.value("padding", 0);
    validate_descriptor(d);
    d.input_bytes = j.value("input_bytes",
                            static_cast<std::uint64_t>(d.in_channels) * d.input_h * d.input_w);
    d.output_bytes = j.value("output_bytes",
                             static_cast<std::uint64_t>(d.out_channels) * d.output_h() * d.output_w());

    QuantParams& q = layer.quant;
    q.weight_bits = bits;
    if (j.contains("quant"))
    {
        const json& qj = j.at("quant");
        q.weight_scale = qj.value("weight_scale", 1.0);
        q.weight_zero_point = qj.value("weight_zero_point", 0);
        q.act_scale = qj.value("act_scale", 1.0);
        q.act_zero_point = qj.value("act_zero_point", 0);
        if (qj.contains("bias"))
            q.bias = qj.at("bias").get<std::vector<double>>();
    }

    QuantizedWeights& w = layer.weights;
    w.layer_id = d.id;
    w.out_channels = d.out_channels;
    w.in_channels = d.in_channels;
    w.kernel_h = d.kernel_h;
    w.kernel_w = d.kernel_w;
    if (!j.contains("weights"))
        throw NetworkError(fmt::format("layer {}: missing weights", d.id));
    w.values = read_weight_values(j.at("weights"), d, bits, base_dir, options);
    return layer;
}

}  // namespace

NetworkModel parse_network(const std::string& text, const std::filesystem::path& base_dir, const LoadOptions& options)
{
    json doc;
    try
    {
        doc = json::parse(text);
    }
    catch (const json::parse_error& e)
    {
        throw NetworkError(fmt::format("parse failure: {}", e.what()));
    }
    try
    {
        NetworkModel net;
        net.name = doc.value("name", "network");
        net.weight_bits = doc.value("weight_bits", 8);
        if (net.weight_bits < 1 || net.weight_bits > 8)
            throw NetworkError(fmt::format("weight_bits {} outside supported range 1..8", net.weight_bits));
        if (!doc.contains("layers") || !doc.at("layers").is_array() || doc.at("layers").empty())
            throw NetworkError("empty network");
        for (const json& lj : doc.at("layers"))
            net.layers.push_back(parse_layer(lj, net.weight_bits, base_dir, options));
        validate_network(net);
        return net;
    }
    catch (const json::exception& e)
    {
        throw NetworkError(fmt::format("malformed network document: {}", e.what()));
    }
}

NetworkModel load_network(const std::filesystem::path& path, const LoadOptions& options)
{
    std::ifstream in(path);
    if (!in)
        throw NetworkError(fmt::format("cannot open network file {}", path.string()));
    std::stringstream buf;
    buf << in.rdbuf();
    try
    {
        return parse_network(buf.str(), path.parent_path(), options);
    }
    catch (const NetworkError& e)
    {
        throw NetworkError(fmt::format("{}: {}", path.string(), e.what()));
    }
}

double EnergyParams::leakage_for_capacity(std::uint64_t capacity) const
{
    return bank_leakage_base + bank_leakage_per_kib * (static_cast<double>(capacity) / 1024.0);
}

std::vector<BankSpec> default_heterogeneous_inventory(const EnergyParams& energy)
{
    constexpr std::uint64_t KiB = 1024;
    const std::uint64_t caps[] = {1 * KiB,   1 * KiB,   2 * KiB,    4 * KiB,    64 * KiB,
                                  128 * KiB, 256 * KiB, 512 * KiB, 1024 * KiB, 2048 * KiB};
    std::vector<BankSpec> banks;
    for (int i = 0; i < 10; ++i)
        banks.push_back({i, caps[i], energy.leakage_for_capacity(caps[i])});
    return banks;
}

std::vector<BankSpec> default_homogeneous_inventory(const EnergyParams& energy)
{
    std::vector<BankSpec> banks;
    for (int i = 0; i < 15; ++i)
        banks.push_back({i, 256 * 1024, energy.leakage_for_capacity(256 * 1024)});
    return banks;
}

AcceleratorConfig default_accelerator_config()
{
    AcceleratorConfig c;
    c.bank_inventory = default_heterogeneous_inventory(c.energy);
    c.baseline_bank_inventory = default_homogeneous_inventory(c.energy);
    return c;
}

namespace
{

void check_positive(long long value, const char* field)
{
    if (value <= 0)
        throw ConfigError(field, fmt::format("must be positive, got {}", value));
}

void check_inventory(const std::vector<BankSpec>& banks, const char* field, std::vector<std::string>& warnings)
{
    if (banks.empty())
        throw ConfigError(field, "inventory is empty");
    for (std::size_t i = 0; i < banks.size(); ++i)
    {
        if (banks[i].id != static_cast<int>(i))
            throw ConfigError(field, "bank ids must be contiguous from 0");
        if (banks[i].capacity == 0)
            throw ConfigError(field, fmt::format("bank {} has zero capacity", i));
        if (!(banks[i].leakage > 0.0))
            throw ConfigError(field, fmt::format("bank {} leakage must be positive", i));
    }
    std::vector<BankSpec> sorted = banks;
    std::stable_sort(sorted.begin(), sorted.end(),
                     [](const BankSpec& a, const BankSpec& b) { return a.capacity < b.capacity; });
    for (std::size_t i = 1; i < sorted.size(); ++i)
        if (sorted[i].leakage < sorted[i - 1].leakage)
        {
            warnings.push_back(fmt::format("{}: leakage decreases with capacity at bank {}", field, sorted[i].id));
            break;
        }
}

}  // namespace

ValidatedConfig validate_config(AcceleratorConfig c)
{
    ValidatedConfig v;
    check_positive(c.num_pes, "num_pes");
    check_positive(c.apu_rows_per_pe, "apu_rows_per_pe");
    check_positive(c.apu_cols_per_pe, "apu_cols_per_pe");
    check_positive(c.crossbar_rows, "crossbar_rows");
    check_positive(c.crossbar_cols, "crossbar_cols");
    check_positive(c.bits_per_cell, "bits_per_cell");
    check_positive(c.weight_bits, "weight_bits");
    check_positive(c.activation_bits, "activation_bits");
    check_positive(static_cast<long long>(c.crossbar_compute_latency), "crossbar_compute_latency");
    check_positive(static_cast<long long>(c.pulse_latency), "pulse_latency");
    if (c.weight_bits > 8)
        throw ConfigError("weight_bits", "at most 8 bits are supported");
    if (c.bits_per_cell > 4)
        throw ConfigError("bits_per_cell", "at most 4 bits per cell are supported");
    if (c.weight_bits % c.bits_per_cell != 0)
        throw ConfigError("bits_per_cell",
                          fmt::format("weight_bits {} is not divisible by bits_per_cell {}", c.weight_bits,
                                      c.bits_per_cell));
    const int cpw = c.weight_bits / c.bits_per_cell;
    if (c.crossbar_cols % cpw != 0)
        throw ConfigError("crossbar_cols",
                          fmt::format("{} columns do not hold a whole number of {}-cell weights", c.crossbar_cols, cpw));
    if (!(c.frequency_hz > 0.0))
        throw ConfigError("frequency", "must be positive");
    if (!(c.mm_bandwidth > 0.0))
        throw ConfigError("mm_bandwidth", "must be positive");
    const EnergyParams& e = c.energy;
    if (e.energy_per_pulse < 0 || e.energy_per_crossbar_read < 0 || e.bank_leakage_base < 0 ||
        e.bank_leakage_per_kib < 0 || e.base_leakage < 0)
        throw ConfigError("energy", "energy parameters must be nonnegative");
    check_inventory(c.bank_inventory, "bank_inventory", v.warnings_);
    check_inventory(c.baseline_bank_inventory, "baseline_bank_inventory", v.warnings_);

    v.cells_per_weight_ = cpw;
    v.max_pulses_per_phase_ = (1 << c.bits_per_cell) - 1;
    v.worst_row_write_latency_ = 2 * static_cast<Cycles>(v.max_pulses_per_phase_) * c.pulse_latency;
    v.crossbar_write_latency_ = static_cast<Cycles>(c.crossbar_rows) * v.worst_row_write_latency_;
    v.params_ = std::move(c);
    return v;
}

Cycles ValidatedConfig::fetch_cycles(std::uint64_t bytes) const
{
    if (bytes == 0)
        return 0;
    return static_cast<Cycles>(std::ceil(static_cast<double>(bytes) / params_.mm_bandwidth));
}

namespace
{

std::vector<BankSpec> parse_inventory(const json& arr, const EnergyParams& energy, const char* field)
{
    if (!arr.is_array())
        throw ConfigError(field, "must be an array");
    std::vector<BankSpec> banks;
    int id = 0;
    for (const json& b : arr)
    {
        BankSpec s;
        s.id = id++;
        if (b.is_number())
        {
            s.capacity = b.get<std::uint64_t>();
            s.leakage = energy.leakage_for_capacity(s.capacity);
        }
        else
        {
            s.capacity = b.at("capacity").get<std::uint64_t>();
            s.leakage = b.contains("leakage") ? b.at("leakage").get<double>()
                                              : energy.leakage_for_capacity(s.capacity);
        }
        banks.push_back(s);
    }
    return banks;
}

}  // namespace

AcceleratorConfig parse_config(const std::string& text)
{
    json j;
    try
    {
        j = json::parse(text);
    }
    catch (const json::parse_error& e)
    {
        throw ConfigError("<document>", e.what());
    }
    AcceleratorConfig c = default_accelerator_config();
    try
    {
        c.num_pes = j.value("num_pes", c.num_pes);
        c.apu_rows_per_pe = j.value("apu_rows_per_pe", c.apu_rows_per_pe);
        c.apu_cols_per_pe = j.value("apu_cols_per_pe", c.apu_cols_per_pe);
        c.crossbar_rows = j.value("crossbar_rows", c.crossbar_rows);
        c.crossbar_cols = j.value("crossbar_cols", c.crossbar_cols);
        c.bits_per_cell = j.value("bits_per_cell", c.bits_per_cell);
        c.weight_bits = j.value("weight_bits", c.weight_bits);
        c.activation_bits = j.value("activation_bits", c.activation_bits);
        c.crossbar_compute_latency = j.value("crossbar_compute_latency", c.crossbar_compute_latency);
        c.pulse_latency = j.value("pulse_latency", c.pulse_latency);
        c.frequency_hz = j.value("frequency", c.frequency_hz);
        c.mm_bandwidth = j.value("mm_bandwidth", c.mm_bandwidth);
        if (j.contains("write_latency_mode"))
        {
            const std::string mode = lower(j.at("write_latency_mode").get<std::string>());
            if (mode == "worst-case" || mode == "worst_case" || mode == "worstcase")
                c.write_latency_mode = WriteLatencyMode::WorstCase;
            else if (mode == "delta")
                c.write_latency_mode = WriteLatencyMode::Delta;
            else
                throw ConfigError("write_latency_mode", fmt::format("unknown mode '{}'", mode));
        }
        if (j.contains("energy"))
        {
            const json& e = j.at("energy");
            EnergyParams& p = c.energy;
            p.energy_per_pulse = e.value("energy_per_pulse", p.energy_per_pulse);
            p.energy_per_crossbar_read = e.value("energy_per_crossbar_read", p.energy_per_crossbar_read);
            p.bank_leakage_base = e.value("bank_leakage_base", p.bank_leakage_base);
            p.bank_leakage_per_kib = e.value("bank_leakage_per_kib", p.bank_leakage_per_kib);
            p.base_leakage = e.value("base_leakage", p.base_leakage);
        }
        c.bank_inventory = j.contains("bank_inventory")
                               ? parse_inventory(j.at("bank_inventory"), c.energy, "bank_inventory")
                               : default_heterogeneous_inventory(c.energy);
        c.baseline_bank_inventory =
            j.contains("baseline_bank_inventory")
                ? parse_inventory(j.at("baseline_bank_inventory"), c.energy, "baseline_bank_inventory")
                : default_homogeneous_inventory(c.energy);
    }
    catch (const json::exception& e)
    {
        throw ConfigError("<document>", e.what());
    }
    return c;
}

AcceleratorConfig load_config(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw Error(fmt::format("cannot open config file {}", path.string()));
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str());
}

void check_compatible(const NetworkModel& network, const ValidatedConfig& config)
{
    if (network.weight_bits != config->weight_bits)
        throw ConfigError("weight_bits", fmt::format("network uses {}-bit weights, accelerator expects {}",
                                                     network.weight_bits, config->weight_bits));
}

}  // namespace aras
