#include "crend/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace crend {

namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint writer assumes a little-endian host");

void write_u32(std::ostream& out, std::uint32_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

void write_u64(std::ostream& out, std::uint64_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

void write_f64(std::ostream& out, double v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

void write_string(std::ostream& out, const std::string& s) {
    write_u32(out, static_cast<std::uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

void write_tensor_values(std::ostream& out, const Tensor& t) {
    out.write(reinterpret_cast<const char*>(t.data()),
              static_cast<std::streamsize>(t.size() * sizeof(double)));
}

struct Reader {
    std::ifstream in;
    std::string path;

    void read_raw(void* dst, std::size_t n) {
        in.read(reinterpret_cast<char*>(dst), static_cast<std::streamsize>(n));
        if (static_cast<std::size_t>(in.gcount()) != n) {
            throw std::runtime_error("load_checkpoint: truncated checkpoint file " + path);
        }
    }
    std::uint32_t u32() {
        std::uint32_t v;
        read_raw(&v, sizeof(v));
        return v;
    }
    std::uint64_t u64() {
        std::uint64_t v;
        read_raw(&v, sizeof(v));
        return v;
    }
    double f64() {
        double v;
        read_raw(&v, sizeof(v));
        return v;
    }
    std::string str() {
        const std::uint32_t n = u32();
        std::string s(n, '\0');
        read_raw(s.data(), n);
        return s;
    }
    void tensor_values(Tensor& t) { read_raw(t.data(), t.size() * sizeof(double)); }
};

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("save_checkpoint: cannot open " + path);

    out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
    write_u32(out, kCheckpointVersion);
    write_string(out, config_to_text(ckpt.config));
    write_u32(out, static_cast<std::uint32_t>(ckpt.epoch));
    write_u64(out, static_cast<std::uint64_t>(ckpt.optimizer.step_count()));
    const AdamWConfig& oc = ckpt.optimizer.config();
    write_f64(out, oc.lr);
    write_f64(out, oc.beta1);
    write_f64(out, oc.beta2);
    write_f64(out, oc.eps);
    write_f64(out, oc.weight_decay);

    write_u32(out, static_cast<std::uint32_t>(ckpt.params.names().size()));
    for (const auto& name : ckpt.params.names()) {
        const Tensor& value = ckpt.params.get(name).value;
        write_string(out, name);
        write_u32(out, static_cast<std::uint32_t>(value.ndim()));
        for (std::size_t d : value.shape()) write_u64(out, d);
        write_tensor_values(out, value);
        write_tensor_values(out, ckpt.optimizer.first_moment(name));
        write_tensor_values(out, ckpt.optimizer.second_moment(name));
    }
    if (!out) throw std::runtime_error("save_checkpoint: write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    Reader r;
    r.path = path;
    r.in.open(path, std::ios::binary);
    if (!r.in) throw std::runtime_error("load_checkpoint: cannot open " + path);

    char magic[5];
    r.read_raw(magic, sizeof(magic));
    if (std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) {
        throw std::runtime_error("load_checkpoint: bad magic in " + path);
    }
    const std::uint32_t version = r.u32();
    if (version != kCheckpointVersion) {
        throw std::runtime_error("load_checkpoint: unsupported checkpoint version " +
                                 std::to_string(version) + " in " + path);
    }

    Checkpoint ckpt;
    ckpt.config = parse_config_text(r.str(), path + " (embedded config)");
    ckpt.epoch = static_cast<int>(r.u32());
    const std::uint64_t step_count = r.u64();
    AdamWConfig oc;
    oc.lr = r.f64();
    oc.beta1 = r.f64();
    oc.beta2 = r.f64();
    oc.eps = r.f64();
    oc.weight_decay = r.f64();
    ckpt.optimizer = AdamW(oc);

    struct MomentRecord {
        std::string name;
        Tensor m;
        Tensor v;
    };
    std::vector<MomentRecord> moments;

    const std::uint32_t num_params = r.u32();
    moments.reserve(num_params);
    for (std::uint32_t i = 0; i < num_params; ++i) {
        const std::string name = r.str();
        const std::uint32_t ndim = r.u32();
        std::vector<std::size_t> shape(ndim);
        for (auto& d : shape) d = static_cast<std::size_t>(r.u64());
        Tensor value(shape);
        r.tensor_values(value);
        MomentRecord rec;
        rec.name = name;
        rec.m = Tensor(shape);
        rec.v = Tensor(shape);
        r.tensor_values(rec.m);
        r.tensor_values(rec.v);
        moments.push_back(std::move(rec));
        ckpt.params.add(name, std::move(value));
    }
    ckpt.optimizer.attach(ckpt.params);
    ckpt.optimizer.set_step_count(static_cast<std::int64_t>(step_count));
    for (auto& rec : moments) {
        ckpt.optimizer.first_moment(rec.name) = std::move(rec.m);
        ckpt.optimizer.second_moment(rec.name) = std::move(rec.v);
    }
    return ckpt;
}

}  // namespace crend
