#include "contraseg/checkpoint.hpp"

namespace contraseg::ckpt {

void write_u32(std::ostream& out, uint32_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
void write_u64(std::ostream& out, uint64_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
void write_i64(std::ostream& out, int64_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
void write_f64(std::ostream& out, double v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
void write_str(std::ostream& out, const std::string& s) {
    write_u32(out, static_cast<uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

uint32_t read_u32(std::istream& in) {
    uint32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof(v));
    if (!in) throw DataError("checkpoint read failed (u32)");
    return v;
}
uint64_t read_u64(std::istream& in) {
    uint64_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof(v));
    if (!in) throw DataError("checkpoint read failed (u64)");
    return v;
}
int64_t read_i64(std::istream& in) {
    int64_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof(v));
    if (!in) throw DataError("checkpoint read failed (i64)");
    return v;
}
double read_f64(std::istream& in) {
    double v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof(v));
    if (!in) throw DataError("checkpoint read failed (f64)");
    return v;
}
std::string read_str(std::istream& in) {
    const uint32_t len = read_u32(in);
    if (len > (1u << 20)) throw DataError("checkpoint string too long");
    std::string s(len, '\0');
    in.read(s.data(), len);
    if (!in) throw DataError("checkpoint read failed (string)");
    return s;
}

void write_meta(std::ostream& out, const CheckpointMeta& meta) {
    write_str(out, meta.config_hash);
    write_u64(out, meta.seed);
    write_str(out, meta.precision);
    write_str(out, meta.phase);
    write_u32(out, static_cast<uint32_t>(meta.iteration));
    write_u32(out, static_cast<uint32_t>(meta.epoch));
    write_f64(out, meta.best_probe_acc);
}

CheckpointMeta read_meta(std::istream& in) {
    CheckpointMeta meta;
    meta.config_hash = read_str(in);
    meta.seed = read_u64(in);
    meta.precision = read_str(in);
    meta.phase = read_str(in);
    meta.iteration = static_cast<int>(read_u32(in));
    meta.epoch = static_cast<int>(read_u32(in));
    meta.best_probe_acc = read_f64(in);
    return meta;
}

}  // namespace contraseg::ckpt
