#include "gamcn/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "gamcn/config.hpp"
#include "gamcn/errors.hpp"

namespace gamcn {

namespace {

constexpr char kMagic[8] = {'G', 'A', 'M', 'C', 'N', 'C', 'K', 'P'};

class Writer {
public:
    explicit Writer(const std::filesystem::path& path) : out_(path, std::ios::binary) {
        if (!out_) throw LoadError("cannot write checkpoint '" + path.string() + "'");
    }
    template <typename T>
    void pod(const T& v) {
        out_.write(reinterpret_cast<const char*>(&v), sizeof(T));
    }
    void text(const std::string& s) {
        pod<std::uint64_t>(s.size());
        out_.write(s.data(), static_cast<std::streamsize>(s.size()));
    }
    void doubles(std::span<const double> v) {
        pod<std::uint64_t>(v.size());
        out_.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
    }
    void finish() {
        out_.flush();
        if (!out_) throw LoadError("checkpoint write failed");
    }

private:
    std::ofstream out_;
};

class Reader {
public:
    explicit Reader(const std::filesystem::path& path) : path_(path.string()), in_(path, std::ios::binary) {
        if (!in_) throw LoadError("cannot open checkpoint '" + path_ + "'");
    }
    void raw(void* dst, std::size_t bytes) {
        in_.read(static_cast<char*>(dst), static_cast<std::streamsize>(bytes));
        if (in_.gcount() != static_cast<std::streamsize>(bytes)) throw LoadError("checkpoint '" + path_ + "' is truncated");
    }
    template <typename T>
    T pod() {
        T v;
        raw(&v, sizeof(T));
        return v;
    }
    std::uint64_t length(std::uint64_t limit) {
        const auto n = pod<std::uint64_t>();
        if (n > limit) throw LoadError("checkpoint '" + path_ + "' has an implausible length field");
        return n;
    }
    std::string text() {
        std::string s(length(1u << 24), '\0');
        raw(s.data(), s.size());
        return s;
    }
    std::vector<double> doubles() {
        std::vector<double> v(length(1ull << 32));
        raw(v.data(), v.size() * sizeof(double));
        return v;
    }
    bool at_end() { return in_.peek() == std::char_traits<char>::eof(); }
    const std::string& path() const { return path_; }

private:
    std::string path_;
    std::ifstream in_;
};

}  // namespace

std::uint64_t graph_fingerprint(const RoadGraph& graph) {
    std::uint64_t h = 1469598103934665603ULL;
    auto mix = [&h](const void* data, std::size_t bytes) {
        const auto* p = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < bytes; ++i) {
            h ^= p[i];
            h *= 1099511628211ULL;
        }
    };
    const std::uint64_t n = graph.vertices();
    const unsigned char flags[2] = {static_cast<unsigned char>(graph.directed()),
                                    static_cast<unsigned char>(graph.has_adjacency())};
    mix(&n, sizeof n);
    mix(flags, sizeof flags);
    if (graph.has_adjacency()) mix(graph.adjacency().data(), graph.adjacency().size() * sizeof(double));
    return h;
}

void save_checkpoint(const std::filesystem::path& path, const Gamcn& model, const Normalizer& normalizer,
                     const RoadGraph& graph) {
    Writer w(path);
    for (char c : kMagic) w.pod(c);
    w.pod(kCheckpointVersion);
    w.text(model_config_to_text(model.config()));
    w.pod(graph_fingerprint(graph));
    w.doubles(normalizer.mu);
    w.doubles(normalizer.sigma);
    const auto& params = model.parameters();
    w.pod<std::uint64_t>(params.size());
    for (const auto& p : params) {
        w.text(p.name);
        w.pod<std::uint32_t>(static_cast<std::uint32_t>(p.tensor.rank()));
        for (auto e : p.tensor.shape()) w.pod<std::uint64_t>(e);
        w.doubles(p.tensor.values());
    }
    w.finish();
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
    Reader r(path);
    char magic[8];
    r.raw(magic, sizeof magic);
    if (std::memcmp(magic, kMagic, sizeof magic) != 0) throw LoadError("'" + r.path() + "' is not a checkpoint file");
    const auto version = r.pod<std::uint32_t>();
    if (version != kCheckpointVersion) {
        throw LoadError("checkpoint version " + std::to_string(version) + " is not supported (expected " +
                        std::to_string(kCheckpointVersion) + ")");
    }
    Checkpoint ck;
    try {
        ck.config = parse_model_config(r.text(), r.path() + "#config");
    } catch (const ConfigError& e) {
        throw LoadError(std::string("checkpoint config is invalid: ") + e.what());
    }
    ck.graph_fingerprint = r.pod<std::uint64_t>();
    ck.normalizer.mu = r.doubles();
    ck.normalizer.sigma = r.doubles();
    if (ck.normalizer.mu.size() != ck.config.conditions || ck.normalizer.sigma.size() != ck.config.conditions) {
        throw LoadError("checkpoint normalizer does not match the condition count");
    }
    const auto count = r.length(1u << 20);
    for (std::uint64_t i = 0; i < count; ++i) {
        StoredParameter p;
        p.name = r.text();
        const auto rank = r.pod<std::uint32_t>();
        if (rank == 0 || rank > 3) throw LoadError("parameter '" + p.name + "' has unsupported rank " + std::to_string(rank));
        for (std::uint32_t k = 0; k < rank; ++k) p.shape.push_back(r.pod<std::uint64_t>());
        p.values = r.doubles();
        if (p.values.size() != shape_size(p.shape)) {
            throw LoadError("parameter '" + p.name + "' value count does not match shape " + shape_string(p.shape));
        }
        ck.parameters.push_back(std::move(p));
    }
    if (!r.at_end()) throw LoadError("checkpoint '" + r.path() + "' has trailing bytes");
    return ck;
}

Gamcn instantiate(const Checkpoint& ck, const RoadGraph& graph) {
    if (graph_fingerprint(graph) != ck.graph_fingerprint) {
        throw LoadError("checkpoint was trained on a different road graph (fingerprint mismatch)");
    }
    Gamcn model(ck.config, graph);
    auto& params = model.parameters();
    if (params.size() != ck.parameters.size()) {
        throw LoadError("checkpoint holds " + std::to_string(ck.parameters.size()) + " parameters but the config builds " +
                        std::to_string(params.size()));
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        const auto& stored = ck.parameters[i];
        auto& live = params[i];
        if (stored.name != live.name) {
            throw LoadError("checkpoint parameter " + std::to_string(i) + " is '" + stored.name + "', expected '" +
                            live.name + "'");
        }
        if (stored.shape != live.tensor.shape()) {
            throw LoadError("checkpoint parameter '" + stored.name + "' has shape " + shape_string(stored.shape) +
                            ", expected " + shape_string(live.tensor.shape()));
        }
        auto dst = live.tensor.mutable_values();
        std::copy(stored.values.begin(), stored.values.end(), dst.begin());
    }
    return model;
}

}  // namespace gamcn
