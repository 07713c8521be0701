#include <cstring>
#include <fstream>

#include "plangen/errors.hpp"
#include "plangen/model.hpp"

// Checkpoint container (little-endian):
//   magic "PLGNCKP1", u32 version
//   u32 n_kv, then n_kv (key, value) strings  -- config echo + extras
//   u64 master_seed, u64 update_count
//   u32 n_params, then per tensor: name, u64 rows, u64 cols, row-major f64
//   u64 adam_step, f64 beta1/beta2/eps
//   u32 n_slots, then per slot: name, u64 rows, u64 cols, m f64s, v f64s

namespace plangen::model {

namespace {

constexpr char kMagic[8] = {'P', 'L', 'G', 'N', 'C', 'K', 'P', '1'};

void put_u32(std::ostream& os, uint32_t v) { os.write(reinterpret_cast<const char*>(&v), 4); }
void put_u64(std::ostream& os, uint64_t v) { os.write(reinterpret_cast<const char*>(&v), 8); }
void put_f64(std::ostream& os, double v) { os.write(reinterpret_cast<const char*>(&v), 8); }

void put_string(std::ostream& os, const std::string& s) {
    put_u32(os, static_cast<uint32_t>(s.size()));
    os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

void put_matrix(std::ostream& os, const Matrix& m) {
    put_u64(os, static_cast<uint64_t>(m.rows()));
    put_u64(os, static_cast<uint64_t>(m.cols()));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) put_f64(os, m(i, j));
}

uint32_t get_u32(std::istream& is) {
    uint32_t v = 0;
    is.read(reinterpret_cast<char*>(&v), 4);
    return v;
}

uint64_t get_u64(std::istream& is) {
    uint64_t v = 0;
    is.read(reinterpret_cast<char*>(&v), 8);
    return v;
}

double get_f64(std::istream& is) {
    double v = 0;
    is.read(reinterpret_cast<char*>(&v), 8);
    return v;
}

std::string get_string(std::istream& is) {
    uint32_t n = get_u32(is);
    std::string s(n, '\0');
    is.read(s.data(), n);
    return s;
}

Matrix get_matrix(std::istream& is) {
    auto rows = static_cast<Eigen::Index>(get_u64(is));
    auto cols = static_cast<Eigen::Index>(get_u64(is));
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = get_f64(is);
    return m;
}

}  // namespace

void save_checkpoint(const std::string& path, Seq2SeqModel& m, const Adam& adam,
                     uint64_t seed, uint64_t update,
                     const std::map<std::string, std::string>& extra) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw ConfigError("cannot write checkpoint '" + path + "'");
    os.write(kMagic, 8);
    put_u32(os, 1);

    auto kv = m.config.to_kv();
    for (const auto& [k, v] : extra) kv[k] = v;
    put_u32(os, static_cast<uint32_t>(kv.size()));
    for (const auto& [k, v] : kv) {
        put_string(os, k);
        put_string(os, v);
    }

    put_u64(os, seed);
    put_u64(os, update);

    auto params = m.parameters();
    put_u32(os, static_cast<uint32_t>(params.size()));
    for (Parameter* p : params) {
        put_string(os, p->name);
        put_matrix(os, p->value);
    }

    put_u64(os, static_cast<uint64_t>(adam.step_count));
    put_f64(os, adam.beta1);
    put_f64(os, adam.beta2);
    put_f64(os, adam.eps);
    put_u32(os, static_cast<uint32_t>(adam.slots.size()));
    for (const auto& [name, slot] : adam.slots) {
        put_string(os, name);
        put_u64(os, static_cast<uint64_t>(slot.m.rows()));
        put_u64(os, static_cast<uint64_t>(slot.m.cols()));
        for (Eigen::Index i = 0; i < slot.m.rows(); ++i)
            for (Eigen::Index j = 0; j < slot.m.cols(); ++j) put_f64(os, slot.m(i, j));
        for (Eigen::Index i = 0; i < slot.v.rows(); ++i)
            for (Eigen::Index j = 0; j < slot.v.cols(); ++j) put_f64(os, slot.v(i, j));
    }
    if (!os) throw ConfigError("failed while writing checkpoint '" + path + "'");
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ConfigError("cannot open checkpoint '" + path + "'");
    char magic[8];
    is.read(magic, 8);
    if (!is || std::memcmp(magic, kMagic, 8) != 0)
        throw ConfigError("'" + path + "' is not a plangen checkpoint");
    uint32_t version = get_u32(is);
    if (version != 1)
        throw ConfigError("checkpoint version " + std::to_string(version) + " unsupported");

    LoadedCheckpoint out;
    uint32_t n_kv = get_u32(is);
    std::map<std::string, std::string> kv;
    for (uint32_t i = 0; i < n_kv; ++i) {
        std::string k = get_string(is);
        kv[k] = get_string(is);
    }
    out.extra = kv;
    out.seed = get_u64(is);
    out.update = get_u64(is);

    ModelConfig cfg = ModelConfig::from_kv(kv);
    out.model = std::make_unique<Seq2SeqModel>(cfg, 0);

    std::map<std::string, Parameter*> by_name;
    for (Parameter* p : out.model->parameters()) by_name[p->name] = p;

    uint32_t n_params = get_u32(is);
    for (uint32_t i = 0; i < n_params; ++i) {
        std::string name = get_string(is);
        Matrix value = get_matrix(is);
        auto it = by_name.find(name);
        if (it == by_name.end())
            throw ConfigError("checkpoint tensor '" + name + "' has no matching parameter");
        if (it->second->value.rows() != value.rows() ||
            it->second->value.cols() != value.cols())
            throw ConfigError("checkpoint tensor '" + name + "' has mismatched shape");
        it->second->value = std::move(value);
        it->second->zero_grad();
    }

    out.adam.step_count = static_cast<long>(get_u64(is));
    out.adam.beta1 = get_f64(is);
    out.adam.beta2 = get_f64(is);
    out.adam.eps = get_f64(is);
    uint32_t n_slots = get_u32(is);
    for (uint32_t i = 0; i < n_slots; ++i) {
        std::string name = get_string(is);
        auto rows = static_cast<Eigen::Index>(get_u64(is));
        auto cols = static_cast<Eigen::Index>(get_u64(is));
        Adam::Slot slot;
        slot.m = Matrix(rows, cols);
        slot.v = Matrix(rows, cols);
        for (Eigen::Index r = 0; r < rows; ++r)
            for (Eigen::Index c = 0; c < cols; ++c) slot.m(r, c) = get_f64(is);
        for (Eigen::Index r = 0; r < rows; ++r)
            for (Eigen::Index c = 0; c < cols; ++c) slot.v(r, c) = get_f64(is);
        out.adam.slots[name] = std::move(slot);
    }
    if (!is) throw ConfigError("checkpoint '" + path + "' is truncated");
    return out;
}

}  // namespace plangen::model
