#include "ppe/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "ppe/errors.hpp"

namespace ppe {

namespace {

constexpr char kMagic[4] = {'P', 'P', 'E', '1'};

class Writer {
public:
    void u32(std::uint32_t v) { put(v, 4); }
    void u64(std::uint64_t v) { put(v, 8); }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void raw(const char* p, std::size_t n) { bytes_.insert(bytes_.end(), p, p + n); }
    std::vector<std::uint8_t> take() { return std::move(bytes_); }

private:
    void put(std::uint64_t v, int n) {
        for (int i = 0; i < n; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    std::vector<std::uint8_t> bytes_;
};

class Reader {
public:
    explicit Reader(const std::vector<std::uint8_t>& b) : b_(b) {}
    std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
    std::uint64_t u64() { return get(8); }
    double f64() { return std::bit_cast<double>(u64()); }
    void raw(char* p, std::size_t n) {
        need(n);
        std::memcpy(p, b_.data() + pos_, n);
        pos_ += n;
    }
    bool done() const { return pos_ == b_.size(); }
    std::size_t remaining() const { return b_.size() - pos_; }

private:
    void need(std::size_t n) const {
        if (b_.size() - pos_ < n) throw IoFailure("checkpoint truncated");
    }
    std::uint64_t get(int n) {
        need(std::size_t(n));
        std::uint64_t v = 0;
        for (int i = 0; i < n; ++i) v |= std::uint64_t(b_[pos_ + std::size_t(i)]) << (8 * i);
        pos_ += std::size_t(n);
        return v;
    }
    const std::vector<std::uint8_t>& b_;
    std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> serialize_model(const EncoderModel& model) {
    Writer w;
    w.raw(kMagic, 4);
    w.u32(model.version);
    w.u64(model.init_seed);
    w.u32(static_cast<std::uint32_t>(model.arch.size()));
    for (const auto& L : model.arch) {
        w.u32(static_cast<std::uint32_t>(L.kind));
        w.u32(static_cast<std::uint32_t>(L.in_ch));
        w.u32(static_cast<std::uint32_t>(L.out_ch));
        w.u32(static_cast<std::uint32_t>(L.kernel));
        w.u32(static_cast<std::uint32_t>(L.activation));
    }
    for (std::size_t i = 0; i < model.arch.size(); ++i) {
        w.u64(model.params.weights[i].size());
        for (double v : model.params.weights[i]) w.f64(v);
        w.u64(model.params.biases[i].size());
        for (double v : model.params.biases[i]) w.f64(v);
    }
    return w.take();
}

EncoderModel deserialize_model(const std::vector<std::uint8_t>& bytes) {
    Reader r(bytes);
    char magic[4];
    r.raw(magic, 4);
    if (std::memcmp(magic, kMagic, 4) != 0) throw IoFailure("not a PPE1 checkpoint");
    EncoderModel m;
    m.version = r.u32();
    if (m.version != kCheckpointVersion)
        throw IoFailure("unsupported checkpoint version " + std::to_string(m.version));
    m.init_seed = r.u64();
    const std::uint32_t n_layers = r.u32();
    if (std::uint64_t(n_layers) * 20 > r.remaining()) throw IoFailure("checkpoint truncated");
    for (std::uint32_t i = 0; i < n_layers; ++i) {
        LayerSpec L;
        const auto kind = r.u32();
        L.in_ch = static_cast<int>(r.u32());
        L.out_ch = static_cast<int>(r.u32());
        L.kernel = static_cast<int>(r.u32());
        const auto act = r.u32();
        if (kind > 1 || act > 2) throw IoFailure("checkpoint: unknown layer descriptor");
        L.kind = static_cast<LayerKind>(kind);
        L.activation = static_cast<Activation>(act);
        m.arch.push_back(L);
    }
    try {
        validate_architecture(m.arch);
    } catch (const IncompatibleArchitecture& e) {
        throw IoFailure(std::string("checkpoint architecture invalid: ") + e.what());
    }
    m.params = ParameterSet::zeros_like(m.arch);
    for (std::size_t i = 0; i < m.arch.size(); ++i) {
        if (r.u64() != m.params.weights[i].size()) throw IoFailure("checkpoint: weight count mismatch");
        for (double& v : m.params.weights[i]) v = r.f64();
        if (r.u64() != m.params.biases[i].size()) throw IoFailure("checkpoint: bias count mismatch");
        for (double& v : m.params.biases[i]) v = r.f64();
    }
    if (!r.done()) throw IoFailure("checkpoint has trailing bytes");
    return m;
}

void save_model(const EncoderModel& model, const std::filesystem::path& path) {
    const auto bytes = serialize_model(model);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoFailure("cannot open '" + path.string() + "' for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
    if (!out) throw IoFailure("write failed for '" + path.string() + "'");
}

EncoderModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoFailure("cannot open checkpoint '" + path.string() + "'");
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    return deserialize_model(bytes);
}

}  // namespace ppe
