#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace aras
{

using Cycles = std::uint64_t;

/// Base class for every error raised by the toolkit.
class Error : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

class NetworkError : public Error
{
public:
    using Error::Error;
};

/// Raised by validate_config; field() names the offending configuration entry.
class ConfigError : public Error
{
public:
    ConfigError(std::string field, const std::string& what);
    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

enum class LayerKind
{
    Conv,
    FC,
};

const char* to_string(LayerKind kind);

struct LayerDescriptor
{
    int id = 0;
    LayerKind kind = LayerKind::Conv;
    int kernel_h = 1;
    int kernel_w = 1;
    int in_channels = 1;
    int out_channels = 1;
    int input_h = 1;
    int input_w = 1;
    int stride = 1;
    int padding = 0;
    std::uint64_t input_bytes = 0;
    std::uint64_t output_bytes = 0;

    int output_h() const;
    int output_w() const;
    std::uint64_t weight_count() const;
    /// Length of one unrolled kernel column: kernel_h * kernel_w * in_channels.
    std::uint64_t unrolled_length() const;
};

/// Checks the shape invariants of a single descriptor. Throws NetworkError.
void validate_descriptor(const LayerDescriptor& layer);

struct QuantParams
{
    double weight_scale = 1.0;
    int weight_zero_point = 0;
    double act_scale = 1.0;
    int act_zero_point = 0;
    std::vector<double> bias;
    int weight_bits = 8;
};

/// Unsigned quantized weights in (out_channels, in_channels, kernel_h, kernel_w) order.
struct QuantizedWeights
{
    int layer_id = 0;
    int out_channels = 0;
    int in_channels = 0;
    int kernel_h = 1;
    int kernel_w = 1;
    std::vector<std::uint8_t> values;

    std::size_t index(int o, int c, int kh, int kw) const
    {
        return ((static_cast<std::size_t>(o) * in_channels + c) * kernel_h + kh) * kernel_w + kw;
    }
    std::uint8_t at(int o, int c, int kh, int kw) const { return values[index(o, c, kh, kw)]; }
    std::size_t size() const { return values.size(); }
};

struct Layer
{
    LayerDescriptor desc;
    QuantizedWeights weights;
    QuantParams quant;
};

struct NetworkModel
{
    std::string name;
    int weight_bits = 8;
    std::vector<Layer> layers;

    std::size_t size() const { return layers.size(); }
};

struct LoadOptions
{
    /// Added to every generator seed in the file.
    std::uint64_t seed_offset = 0;
};

/// Loads a network description (JSON document with a "layers" array). Weight
/// blobs are either inline "values", a sidecar raw binary "file" (one byte per
/// weight, resolved relative to the document), or a seeded "generator".
NetworkModel load_network(const std::filesystem::path& path, const LoadOptions& options = {});

/// Same as load_network but from an in-memory document; base_dir resolves sidecar files.
NetworkModel parse_network(const std::string& text, const std::filesystem::path& base_dir = {},
                           const LoadOptions& options = {});

/// Structural checks shared by the loader and programmatically built networks.
void validate_network(const NetworkModel& network);

struct BankSpec
{
    int id = 0;
    std::uint64_t capacity = 0;  // bytes
    double leakage = 0.0;        // joules per cycle

    bool operator==(const BankSpec&) const = default;
};

struct EnergyParams
{
    double energy_per_pulse = 2.0e-11;
    double energy_per_crossbar_read = 1.0e-11;
    /// Bank leakage when an inventory entry gives only a capacity: base + per_kib * KiB.
    double bank_leakage_base = 1.0e-12;
    double bank_leakage_per_kib = 2.0e-13;
    /// Leakage of everything outside the global buffer.
    double base_leakage = 2.0e-10;

    double leakage_for_capacity(std::uint64_t capacity) const;
};

enum class WriteLatencyMode
{
    /// Every crossbar write costs rows * 2 * (2^b - 1) * pulse_latency.
    WorstCase,
    /// Rows are charged by their slowest decrease and increase cells.
    Delta,
};

const char* to_string(WriteLatencyMode mode);

struct AcceleratorConfig
{
    int num_pes = 96;
    int apu_rows_per_pe = 6;
    int apu_cols_per_pe = 4;
    int crossbar_rows = 128;
    int crossbar_cols = 128;
    int bits_per_cell = 2;
    int weight_bits = 8;
    int activation_bits = 8;
    Cycles crossbar_compute_latency = 96;
    Cycles pulse_latency = 1000;
    double frequency_hz = 1.0e9;
    double mm_bandwidth = 19.2;  // bytes per cycle
    WriteLatencyMode write_latency_mode = WriteLatencyMode::WorstCase;
    std::vector<BankSpec> bank_inventory;
    std::vector<BankSpec> baseline_bank_inventory;
    EnergyParams energy;
};

std::vector<BankSpec> default_heterogeneous_inventory(const EnergyParams& energy = {});
std::vector<BankSpec> default_homogeneous_inventory(const EnergyParams& energy = {});

/// Defaults from the reference accelerator (96 PEs of 6x4 APUs, 128x128 2-bit cells).
AcceleratorConfig default_accelerator_config();

/// An AcceleratorConfig whose invariants have been checked, plus derived constants.
class ValidatedConfig
{
public:
    const AcceleratorConfig& params() const noexcept { return params_; }
    const AcceleratorConfig* operator->() const noexcept { return &params_; }

    int cells_per_weight() const noexcept { return cells_per_weight_; }
    int cell_levels() const noexcept { return 1 << params_.bits_per_cell; }
    int max_pulses_per_phase() const noexcept { return max_pulses_per_phase_; }
    int kernels_per_crossbar() const noexcept { return params_.crossbar_cols / cells_per_weight_; }
    int total_pe_rows() const noexcept { return params_.num_pes * params_.apu_rows_per_pe; }
    int total_crossbars() const noexcept { return total_pe_rows() * params_.apu_cols_per_pe; }
    Cycles worst_row_write_latency() const noexcept { return worst_row_write_latency_; }
    /// Worst-case latency of writing a whole crossbar row by row.
    Cycles crossbar_write_latency() const noexcept { return crossbar_write_latency_; }
    /// Cycles to stream `bytes` from main memory at full bandwidth.
    Cycles fetch_cycles(std::uint64_t bytes) const;
    /// Non-fatal findings, e.g. bank leakage not monotone in capacity.
    const std::vector<std::string>& warnings() const noexcept { return warnings_; }

private:
    friend ValidatedConfig validate_config(AcceleratorConfig config);
    AcceleratorConfig params_;
    int cells_per_weight_ = 0;
    int max_pulses_per_phase_ = 0;
    Cycles worst_row_write_latency_ = 0;
    Cycles crossbar_write_latency_ = 0;
    std::vector<std::string> warnings_;
};

ValidatedConfig validate_config(AcceleratorConfig config);

inline ValidatedConfig default_config() { return validate_config(default_accelerator_config()); }

/// Reads a JSON config; every AcceleratorConfig field is optional and overrides the default.
AcceleratorConfig load_config(const std::filesystem::path& path);
AcceleratorConfig parse_config(const std::string& text);

/// Throws ConfigError if the network cannot run on the accelerator (weight precision mismatch).
void check_compatible(const NetworkModel& network, const ValidatedConfig& config);

}  // namespace aras
