#pragma once

#include <array>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "gamcn/graph.hpp"
#include "gamcn/temporal.hpp"
#include "gamcn/tensor.hpp"

namespace gamcn {

using Clock = std::chrono::system_clock;
using Instant = std::chrono::sys_seconds;

/// "YYYY-MM-DDTHH:MM:SS" (a space is accepted in place of 'T').
Instant parse_instant(const std::string& text);
std::string format_instant(Instant t);

/// Slot of day, day of week (0 = Sunday) and holiday flag of an instant.
TimeStamp time_stamp_of(Instant t, const std::vector<std::chrono::sys_days>& holidays = {});

/// Traffic conditions on a fixed time grid. Values are stored [T x n x c].
struct TrafficDataset {
    std::vector<Instant> timestamps;
    std::size_t vertices = 0;
    std::vector<std::string> conditions{"speed"};
    std::vector<double> values;
    RoadGraph graph{1};
    int interval_minutes = 5;
    std::string unit = "km/h";
    std::vector<std::chrono::sys_days> holidays;

    std::size_t length() const { return timestamps.size(); }
    std::size_t condition_count() const { return conditions.size(); }
    double value(std::size_t t, std::size_t v, std::size_t c = 0) const {
        return values[(t * vertices + v) * conditions.size() + c];
    }
    TimeStamp time_of(std::size_t t) const { return time_stamp_of(timestamps[t], holidays); }

    /// Throws LoadError when the grid, shapes or values are inconsistent.
    void validate() const;
};

/// Reads a speed CSV (`timestamp,v0,v1,...` or `timestamp,v0_speed,...`) and
/// an optional `src,dst,weight` adjacency CSV. The adjacency is only
/// required later, by the spatial variants that use it.
TrafficDataset load_dataset(const std::filesystem::path& speed_csv,
                            const std::optional<std::filesystem::path>& adjacency_csv, int interval_minutes,
                            bool directed = false);

/// Directory form: speed.csv, optional adjacency.csv and manifest.txt.
TrafficDataset load_dataset_dir(const std::filesystem::path& dir);
void save_dataset_dir(const TrafficDataset& ds, const std::filesystem::path& dir);

struct SynthOptions {
    std::size_t vertices = 20;
    std::size_t days = 14;
    int interval_minutes = 5;
    std::size_t clusters = 4;
    double noise_sigma = 1.0;
    std::uint64_t seed = 1;
    double free_flow = 65.0;          ///< km/h
    double morning_hour = 8.0;
    double evening_hour = 17.5;
    double dip_width_hours = 1.25;    ///< Gaussian standard deviation
    double max_phase_minutes = 15.0;
    double noise_persistence = 0.95;  ///< AR(1) coefficient of the cluster component
};

/// Weekly-periodic synthetic traffic with per-cluster rush-hour profiles and
/// a ring-of-clusters adjacency. Starts on Sunday 2023-01-01.
TrafficDataset synthesize_dataset(const SynthOptions& options);

/// Cluster of each vertex under synthesize_dataset's contiguous assignment.
std::size_t synth_cluster_of(std::size_t vertex, std::size_t vertices, std::size_t clusters);

enum class Split { train, val, test };
std::string to_string(Split s);

struct SampleWindow {
    Tensor input;   ///< [p x n x c]
    Tensor target;  ///< [q x n x c]
    std::vector<TimeStamp> horizon_times;
    std::size_t start = 0;  ///< index of the first input stamp
    Split split = Split::train;
};

/// Half-open stamp ranges [0, train_end), [train_end, val_end), [val_end, total).
struct SplitRanges {
    std::size_t train_end = 0;
    std::size_t val_end = 0;
    std::size_t total = 0;
};

SplitRanges split_ranges(std::size_t total, std::array<double, 3> ratios = {0.7, 0.1, 0.2});

struct WindowSet {
    std::vector<SampleWindow> train;
    std::vector<SampleWindow> val;
    std::vector<SampleWindow> test;
    SplitRanges ranges;
};

/// Stride-1 windows that stay inside their split. Throws ConfigError when a
/// split is too short for a single window.
WindowSet make_windows(const TrafficDataset& ds, std::size_t p, std::size_t q,
                       std::array<double, 3> ratios = {0.7, 0.1, 0.2});

}  // namespace gamcn
