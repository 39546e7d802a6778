#include "gamcn/data.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <random>
#include <sstream>

#include "gamcn/csv.hpp"
#include "gamcn/errors.hpp"
#include "gamcn/kv.hpp"

namespace gamcn {

namespace chr = std::chrono;

namespace {

int parse_int_field(std::string_view text, const std::string& whole) {
    int v = 0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size()) throw LoadError("malformed timestamp '" + whole + "'");
    return v;
}

chr::sys_days parse_date(const std::string& text) {
    if (text.size() != 10 || text[4] != '-' || text[7] != '-') {
        throw LoadError("malformed date '" + text + "' (expected YYYY-MM-DD)");
    }
    const std::string_view s(text);
    const chr::year_month_day ymd{chr::year{parse_int_field(s.substr(0, 4), text)},
                                  chr::month{static_cast<unsigned>(parse_int_field(s.substr(5, 2), text))},
                                  chr::day{static_cast<unsigned>(parse_int_field(s.substr(8, 2), text))}};
    if (!ymd.ok()) throw LoadError("invalid calendar date '" + text + "'");
    return chr::sys_days{ymd};
}

std::string format_date(chr::sys_days d) {
    const chr::year_month_day ymd{d};
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                  static_cast<unsigned>(ymd.day()));
    return buf;
}

struct Column {
    std::size_t vertex;
    std::size_t condition;
};

// Maps `v{i}` or `v{i}_{name}` header cells to (vertex, condition) slots.
std::vector<Column> parse_header(const std::vector<std::string>& header, const std::string& file, std::size_t& vertices,
                                 std::vector<std::string>& conditions) {
    if (header.empty() || header[0] != "timestamp") throw LoadError(file + ": first header column must be 'timestamp'");
    std::vector<Column> cols;
    std::map<std::string, std::size_t> cond_index;
    std::size_t max_vertex = 0;
    bool bare = false, named = false;
    for (std::size_t i = 1; i < header.size(); ++i) {
        const std::string& h = header[i];
        if (h.size() < 2 || h[0] != 'v') throw LoadError(file + ": header column '" + h + "' is not v{i} or v{i}_{cond}");
        const auto us = h.find('_');
        const std::string num = h.substr(1, us == std::string::npos ? std::string::npos : us - 1);
        std::size_t v = 0;
        const auto [ptr, ec] = std::from_chars(num.data(), num.data() + num.size(), v);
        if (num.empty() || ec != std::errc() || ptr != num.data() + num.size()) {
            throw LoadError(file + ": header column '" + h + "' has no vertex index");
        }
        const std::string cond = us == std::string::npos ? "speed" : h.substr(us + 1);
        (us == std::string::npos ? bare : named) = true;
        auto it = cond_index.find(cond);
        if (it == cond_index.end()) {
            it = cond_index.emplace(cond, conditions.size()).first;
            conditions.push_back(cond);
        }
        cols.push_back({v, it->second});
        max_vertex = std::max(max_vertex, v);
    }
    if (cols.empty()) throw LoadError(file + ": no vertex columns");
    if (bare && named) throw LoadError(file + ": header mixes v{i} and v{i}_{cond} columns");
    vertices = max_vertex + 1;
    std::vector<int> seen(vertices * conditions.size(), 0);
    for (const auto& c : cols) {
        if (seen[c.vertex * conditions.size() + c.condition]++) {
            throw LoadError(file + ": duplicate column for vertex " + std::to_string(c.vertex));
        }
    }
    for (std::size_t k = 0; k < seen.size(); ++k) {
        if (!seen[k]) {
            throw LoadError(file + ": missing column for vertex " + std::to_string(k / conditions.size()) + " condition '" +
                            conditions[k % conditions.size()] + "'");
        }
    }
    return cols;
}

}  // namespace

Instant parse_instant(const std::string& text) {
    // YYYY-MM-DDTHH:MM[:SS]
    if (text.size() < 16 || (text[10] != 'T' && text[10] != ' ') || text[13] != ':') {
        throw LoadError("malformed timestamp '" + text + "' (expected YYYY-MM-DDTHH:MM:SS)");
    }
    const auto day = parse_date(text.substr(0, 10));
    const std::string_view s(text);
    const int hh = parse_int_field(s.substr(11, 2), text);
    const int mm = parse_int_field(s.substr(14, 2), text);
    int ss = 0;
    if (text.size() == 19 && text[16] == ':') {
        ss = parse_int_field(s.substr(17, 2), text);
    } else if (text.size() != 16) {
        throw LoadError("malformed timestamp '" + text + "'");
    }
    if (hh > 23 || mm > 59 || ss > 59 || hh < 0 || mm < 0 || ss < 0) throw LoadError("timestamp out of range '" + text + "'");
    return Instant{day} + chr::hours{hh} + chr::minutes{mm} + chr::seconds{ss};
}

std::string format_instant(Instant t) {
    const auto day = chr::floor<chr::days>(t);
    const chr::hh_mm_ss hms{t - day};
    char buf[32];
    std::snprintf(buf, sizeof buf, "%sT%02d:%02d:%02d", format_date(day).c_str(), static_cast<int>(hms.hours().count()),
                  static_cast<int>(hms.minutes().count()), static_cast<int>(hms.seconds().count()));
    return buf;
}

TimeStamp time_stamp_of(Instant t, const std::vector<chr::sys_days>& holidays) {
    const auto day = chr::floor<chr::days>(t);
    const auto minutes = chr::duration_cast<chr::minutes>(t - day).count();
    TimeStamp ts;
    ts.slot = static_cast<int>(minutes / 5);
    ts.day = static_cast<int>(chr::weekday{day}.c_encoding());
    for (const auto& h : holidays) ts.holiday = ts.holiday || h == day;
    return ts;
}

void TrafficDataset::validate() const {
    if (vertices == 0) throw LoadError("dataset has no vertices");
    if (conditions.empty()) throw LoadError("dataset has no conditions");
    if (interval_minutes <= 0 || 1440 % interval_minutes != 0) {
        throw LoadError("interval of " + std::to_string(interval_minutes) + " minutes does not divide a day");
    }
    if (values.size() != timestamps.size() * vertices * conditions.size()) {
        throw LoadError("dataset value count does not match T x n x c");
    }
    if (graph.vertices() != vertices) throw LoadError("graph and dataset disagree on the vertex count");
    for (std::size_t t = 1; t < timestamps.size(); ++t) {
        if (timestamps[t] - timestamps[t - 1] != chr::minutes{interval_minutes}) {
            throw LoadError("timestamps " + format_instant(timestamps[t - 1]) + " and " + format_instant(timestamps[t]) +
                            " are not one interval apart");
        }
    }
    for (double v : values) {
        if (!std::isfinite(v)) throw LoadError("dataset contains a non-finite value");
    }
}

TrafficDataset load_dataset(const std::filesystem::path& speed_csv,
                            const std::optional<std::filesystem::path>& adjacency_csv, int interval_minutes,
                            bool directed) {
    if (interval_minutes <= 0) throw LoadError("interval must be positive");
    CsvReader reader(speed_csv);
    TrafficDataset ds;
    ds.interval_minutes = interval_minutes;
    ds.conditions.clear();
    const auto cols = parse_header(reader.header(), speed_csv.string(), ds.vertices, ds.conditions);
    const std::size_t c = ds.conditions.size();
    const auto step = chr::minutes{interval_minutes};

    std::vector<std::string> fields;
    std::vector<double> row(ds.vertices * c);
    while (reader.next(fields)) {
        if (fields.size() != cols.size() + 1) {
            throw LoadError(reader.where() + ": expected " + std::to_string(cols.size() + 1) + " fields, got " +
                            std::to_string(fields.size()));
        }
        Instant t;
        try {
            t = parse_instant(fields[0]);
        } catch (const LoadError& e) {
            throw LoadError(reader.where() + ": " + e.what());
        }
        if (t.time_since_epoch() % step != chr::seconds{0}) {
            throw LoadError(reader.where() + ": timestamp " + fields[0] + " is off the " +
                            std::to_string(interval_minutes) + "-minute grid");
        }
        if (!ds.timestamps.empty()) {
            const auto prev = ds.timestamps.back();
            if (t <= prev) {
                throw LoadError(reader.where() + ": timestamp " + fields[0] + " is not after " + format_instant(prev));
            }
            if (t - prev != step) {
                const auto gap = t - prev;
                if (gap % step != chr::seconds{0}) {
                    throw LoadError(reader.where() + ": timestamp " + fields[0] + " is off the " +
                                    std::to_string(interval_minutes) + "-minute grid");
                }
                std::string missing;
                const auto count = gap / step - 1;
                for (long k = 1; k <= std::min<long>(count, 5); ++k) {
                    missing += (k > 1 ? ", " : "") + format_instant(prev + k * step);
                }
                if (count > 5) missing += ", ... (" + std::to_string(count) + " missing)";
                throw LoadError(reader.where() + ": gap in timestamp grid; missing " + missing);
            }
        }
        for (std::size_t i = 0; i < cols.size(); ++i) {
            row[cols[i].vertex * c + cols[i].condition] = parse_double(fields[i + 1], reader);
        }
        ds.timestamps.push_back(t);
        ds.values.insert(ds.values.end(), row.begin(), row.end());
    }
    if (ds.timestamps.empty()) throw LoadError(speed_csv.string() + ": no data rows");
    ds.graph = adjacency_csv ? load_adjacency_csv(*adjacency_csv, ds.vertices, directed) : RoadGraph(ds.vertices, directed);
    ds.validate();
    return ds;
}

TrafficDataset load_dataset_dir(const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) throw LoadError("data directory '" + dir.string() + "' does not exist");
    int interval = 5;
    bool directed = false;
    std::string unit = "km/h";
    std::vector<chr::sys_days> holidays;
    std::optional<std::size_t> declared_vertices;
    const auto manifest = dir / "manifest.txt";
    if (fs::exists(manifest)) {
        std::ifstream in(manifest);
        std::vector<KeyValue> kvs;
        try {
            kvs = parse_key_values(in, manifest.string());
        } catch (const ConfigError& e) {
            throw LoadError(e.what());
        }
        for (const auto& kv : kvs) {
            const std::string where = manifest.string() + ":" + std::to_string(kv.line);
            try {
                if (kv.key == "interval_minutes") {
                    interval = std::stoi(kv.value);
                } else if (kv.key == "unit") {
                    unit = kv.value;
                } else if (kv.key == "vertices") {
                    declared_vertices = std::stoul(kv.value);
                } else if (kv.key == "directed") {
                    if (kv.value != "true" && kv.value != "false") throw LoadError(where + ": directed must be true or false");
                    directed = kv.value == "true";
                } else if (kv.key == "holidays") {
                    for (const auto& d : split_list(kv.value)) holidays.push_back(parse_date(d));
                } else if (kv.key == "conditions") {
                    // informational; the speed CSV header is authoritative
                } else {
                    throw LoadError(where + ": unknown manifest key '" + kv.key + "'");
                }
            } catch (const std::logic_error&) {
                throw LoadError(where + ": invalid value '" + kv.value + "' for " + kv.key);
            }
        }
    }
    const auto adj = dir / "adjacency.csv";
    auto ds = load_dataset(dir / "speed.csv", fs::exists(adj) ? std::optional{adj} : std::nullopt, interval, directed);
    if (declared_vertices && *declared_vertices != ds.vertices) {
        throw LoadError("manifest declares " + std::to_string(*declared_vertices) + " vertices but speed.csv has " +
                        std::to_string(ds.vertices));
    }
    ds.unit = unit;
    ds.holidays = std::move(holidays);
    return ds;
}

void save_dataset_dir(const TrafficDataset& ds, const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    ds.validate();
    fs::create_directories(dir);
    const std::size_t c = ds.condition_count();
    {
        std::ofstream out(dir / "speed.csv");
        if (!out) throw LoadError("cannot write '" + (dir / "speed.csv").string() + "'");
        out << "timestamp";
        for (std::size_t v = 0; v < ds.vertices; ++v) {
            for (std::size_t k = 0; k < c; ++k) {
                out << ",v" << v;
                if (c > 1 || ds.conditions[0] != "speed") out << '_' << ds.conditions[k];
            }
        }
        out << '\n';
        for (std::size_t t = 0; t < ds.length(); ++t) {
            out << format_instant(ds.timestamps[t]);
            for (std::size_t j = 0; j < ds.vertices * c; ++j) out << ',' << format_double(ds.values[t * ds.vertices * c + j]);
            out << '\n';
        }
    }
    if (ds.graph.has_adjacency()) {
        save_adjacency_csv(ds.graph, dir / "adjacency.csv");
    } else if (fs::exists(dir / "adjacency.csv")) {
        fs::remove(dir / "adjacency.csv");
    }
    std::ofstream out(dir / "manifest.txt");
    out << "interval_minutes=" << ds.interval_minutes << '\n'
        << "unit=" << ds.unit << '\n'
        << "vertices=" << ds.vertices << '\n'
        << "directed=" << (ds.graph.directed() ? "true" : "false") << '\n';
    out << "conditions=";
    for (std::size_t k = 0; k < c; ++k) out << (k ? "," : "") << ds.conditions[k];
    out << '\n';
    if (!ds.holidays.empty()) {
        out << "holidays=";
        for (std::size_t k = 0; k < ds.holidays.size(); ++k) out << (k ? "," : "") << format_date(ds.holidays[k]);
        out << '\n';
    }
}

std::size_t synth_cluster_of(std::size_t vertex, std::size_t vertices, std::size_t clusters) {
    return vertex * clusters / vertices;
}

TrafficDataset synthesize_dataset(const SynthOptions& o) {
    if (o.vertices < 2) throw ConfigError("synthetic dataset needs at least 2 vertices");
    if (o.days < 1) throw ConfigError("synthetic dataset needs at least 1 day");
    if (o.clusters < 1 || o.clusters > o.vertices) throw ConfigError("clusters must be in [1, vertices]");
    if (o.interval_minutes <= 0 || 1440 % o.interval_minutes != 0) {
        throw ConfigError("interval of " + std::to_string(o.interval_minutes) + " minutes does not divide a day");
    }
    if (o.noise_sigma < 0.0) throw ConfigError("noise sigma must be >= 0");

    const std::size_t n = o.vertices, k_count = o.clusters;
    Rng rng(o.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);

    struct ClusterProfile {
        double base, morning, evening, weekend_scale, weekend_midday;
    };
    std::vector<ClusterProfile> clusters(k_count);
    for (std::size_t k = 0; k < k_count; ++k) {
        // Alternate inbound (morning-heavy) and outbound (evening-heavy) clusters.
        const double heavy = 18.0 + 10.0 * unit(rng), light = 3.0 + 5.0 * unit(rng);
        clusters[k].base = o.free_flow + 6.0 * (unit(rng) - 0.5);
        clusters[k].morning = k % 2 == 0 ? heavy : light;
        clusters[k].evening = k % 2 == 0 ? light : heavy;
        clusters[k].weekend_scale = 0.1 + 0.3 * unit(rng);
        clusters[k].weekend_midday = 2.0 + 6.0 * unit(rng);
    }
    struct VertexProfile {
        std::size_t cluster;
        double phase_hours, amplitude, offset;
    };
    std::vector<VertexProfile> verts(n);
    for (std::size_t v = 0; v < n; ++v) {
        verts[v].cluster = synth_cluster_of(v, n, k_count);
        verts[v].phase_hours = (2.0 * unit(rng) - 1.0) * o.max_phase_minutes / 60.0;
        verts[v].amplitude = 0.85 + 0.3 * unit(rng);
        verts[v].offset = 4.0 * (unit(rng) - 0.5);
    }

    auto bump = [&](double hour, double centre, double width) {
        const double z = (hour - centre) / width;
        return std::exp(-0.5 * z * z);
    };

    TrafficDataset ds;
    ds.vertices = n;
    ds.interval_minutes = o.interval_minutes;
    const std::size_t per_day = 1440 / static_cast<std::size_t>(o.interval_minutes);
    const std::size_t total = per_day * o.days;
    const Instant start{chr::sys_days{chr::year{2023} / chr::January / 1}};
    ds.timestamps.reserve(total);
    ds.values.resize(total * n);

    const double phi = o.noise_persistence;
    const double innovation = std::sqrt(std::max(0.0, 1.0 - phi * phi));
    std::vector<double> cluster_noise(k_count, 0.0);
    for (auto& e : cluster_noise) e = o.noise_sigma * gauss(rng);

    for (std::size_t t = 0; t < total; ++t) {
        const auto instant = start + chr::minutes{static_cast<long>(t) * o.interval_minutes};
        ds.timestamps.push_back(instant);
        const std::size_t minute_of_day = (t % per_day) * static_cast<std::size_t>(o.interval_minutes);
        const double hour = static_cast<double>(minute_of_day) / 60.0;
        const auto wd = chr::weekday{chr::floor<chr::days>(instant)}.c_encoding();
        const bool weekend = wd == 0 || wd == 6;
        if (t > 0) {
            for (auto& e : cluster_noise) e = phi * e + innovation * o.noise_sigma * gauss(rng);
        }
        for (std::size_t v = 0; v < n; ++v) {
            const auto& vp = verts[v];
            const auto& cp = clusters[vp.cluster];
            const double h = hour - vp.phase_hours;
            double dip = cp.morning * bump(h, o.morning_hour, o.dip_width_hours) +
                         cp.evening * bump(h, o.evening_hour, o.dip_width_hours);
            if (weekend) dip = cp.weekend_scale * dip + cp.weekend_midday * bump(h, 13.0, 2.0 * o.dip_width_hours);
            const double white = 0.5 * o.noise_sigma * gauss(rng);
            ds.values[t * n + v] = cp.base + vp.offset - vp.amplitude * dip + cluster_noise[vp.cluster] + white;
        }
    }

    std::vector<double> w(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (i != j && verts[i].cluster == verts[j].cluster) w[i * n + j] = 1.0;
        }
    }
    if (k_count > 1) {
        std::vector<std::size_t> first(k_count, n), last(k_count, 0);
        for (std::size_t v = 0; v < n; ++v) {
            first[verts[v].cluster] = std::min(first[verts[v].cluster], v);
            last[verts[v].cluster] = std::max(last[verts[v].cluster], v);
        }
        for (std::size_t k = 0; k < k_count; ++k) {
            const std::size_t a = last[k], b = first[(k + 1) % k_count];
            if (a == b) continue;
            w[a * n + b] = 0.5;
            w[b * n + a] = 0.5;
        }
    }
    ds.graph = RoadGraph(n, std::move(w), false);
    return ds;
}

std::string to_string(Split s) {
    switch (s) {
        case Split::train: return "train";
        case Split::val: return "val";
        case Split::test: return "test";
    }
    return "?";
}

SplitRanges split_ranges(std::size_t total, std::array<double, 3> ratios) {
    for (double r : ratios) {
        if (!(r > 0.0)) throw ConfigError("split ratios must be positive");
    }
    if (std::abs(ratios[0] + ratios[1] + ratios[2] - 1.0) > 1e-9) throw ConfigError("split ratios must sum to 1");
    SplitRanges r;
    r.total = total;
    r.train_end = static_cast<std::size_t>(std::llround(ratios[0] * static_cast<double>(total)));
    r.val_end = static_cast<std::size_t>(std::llround((ratios[0] + ratios[1]) * static_cast<double>(total)));
    return r;
}

WindowSet make_windows(const TrafficDataset& ds, std::size_t p, std::size_t q, std::array<double, 3> ratios) {
    if (p < 1 || q < 1) throw ConfigError("window lengths p and q must be >= 1");
    WindowSet set;
    set.ranges = split_ranges(ds.length(), ratios);
    const std::size_t n = ds.vertices, c = ds.condition_count();
    const std::size_t frame = n * c;

    auto build = [&](std::size_t begin, std::size_t end, Split split, std::vector<SampleWindow>& out) {
        const std::size_t len = end - begin;
        if (len < p + q) {
            throw ConfigError("split '" + to_string(split) + "' has " + std::to_string(len) + " stamps but p + q = " +
                              std::to_string(p + q) + "; each split needs at least p + q stamps");
        }
        out.reserve(len - p - q + 1);
        for (std::size_t s = begin; s + p + q <= end; ++s) {
            SampleWindow w;
            w.start = s;
            w.split = split;
            w.input = Tensor({p, n, c}, std::vector<double>(ds.values.begin() + static_cast<std::ptrdiff_t>(s * frame),
                                                            ds.values.begin() + static_cast<std::ptrdiff_t>((s + p) * frame)));
            w.target =
                Tensor({q, n, c}, std::vector<double>(ds.values.begin() + static_cast<std::ptrdiff_t>((s + p) * frame),
                                                      ds.values.begin() + static_cast<std::ptrdiff_t>((s + p + q) * frame)));
            for (std::size_t i = 0; i < q; ++i) w.horizon_times.push_back(ds.time_of(s + p + i));
            out.push_back(std::move(w));
        }
    };
    build(0, set.ranges.train_end, Split::train, set.train);
    build(set.ranges.train_end, set.ranges.val_end, Split::val, set.val);
    build(set.ranges.val_end, set.ranges.total, Split::test, set.test);
    return set;
}

}  // namespace gamcn
