// Checkpoint archive: named parameter tensors (value + Adam moments) plus a
// metadata record. Raw little-endian arrays, so a reload is bit-exact and a
// resumed run reproduces an uninterrupted one.

#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "contraseg/common.hpp"
#include "contraseg/layers.hpp"

namespace contraseg::ckpt {

struct CheckpointMeta {
    std::string config_hash;
    uint64_t seed = 0;
    std::string precision;  // float64 | float32
    std::string phase;
    int iteration = 0;
    int epoch = 0;
    double best_probe_acc = 0.0;
};

// --- low-level framing ------------------------------------------------------

void write_u32(std::ostream& out, uint32_t v);
void write_u64(std::ostream& out, uint64_t v);
void write_i64(std::ostream& out, int64_t v);
void write_f64(std::ostream& out, double v);
void write_str(std::ostream& out, const std::string& s);
uint32_t read_u32(std::istream& in);
uint64_t read_u64(std::istream& in);
int64_t read_i64(std::istream& in);
double read_f64(std::istream& in);
std::string read_str(std::istream& in);

void write_meta(std::ostream& out, const CheckpointMeta& meta);
CheckpointMeta read_meta(std::istream& in);

inline constexpr char kMagic[9] = "CSEGCKPT";

// --- archive ----------------------------------------------------------------

template <class S>
void save_checkpoint(const std::filesystem::path& path, const CheckpointMeta& meta,
                     const std::vector<nn::Param<S>*>& params) {
    std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write checkpoint: " + path.string());
    out.write(kMagic, 8);
    write_u32(out, 1);  // format version
    write_meta(out, meta);
    write_u32(out, static_cast<uint32_t>(params.size()));
    for (const auto* p : params) {
        write_str(out, p->name);
        write_u32(out, sizeof(S) == 8 ? 0u : 1u);
        write_u32(out, static_cast<uint32_t>(p->rows));
        write_u32(out, static_cast<uint32_t>(p->cols));
        write_i64(out, p->steps);
        for (const auto* arr : {&p->value, &p->m, &p->v})
            out.write(reinterpret_cast<const char*>(arr->data()),
                      static_cast<std::streamsize>(arr->size() * sizeof(S)));
    }
    if (!out) throw DataError("short write on checkpoint: " + path.string());
}

template <class S>
CheckpointMeta load_checkpoint(const std::filesystem::path& path,
                               const std::vector<nn::Param<S>*>& params) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint: " + path.string());
    char magic[8];
    in.read(magic, 8);
    if (!in || std::string(magic, 8) != std::string(kMagic, 8))
        throw DataError("not a checkpoint file: " + path.string());
    const uint32_t version = read_u32(in);
    if (version != 1)
        throw DataError("unsupported checkpoint version " + std::to_string(version));
    CheckpointMeta meta = read_meta(in);

    const uint32_t count = read_u32(in);
    std::vector<bool> filled(params.size(), false);
    for (uint32_t e = 0; e < count; ++e) {
        const std::string name = read_str(in);
        const uint32_t dtype = read_u32(in);
        const int rows = static_cast<int>(read_u32(in));
        const int cols = static_cast<int>(read_u32(in));
        const int64_t steps = read_i64(in);
        if (dtype != (sizeof(S) == 8 ? 0u : 1u))
            throw DataError("checkpoint precision does not match model precision for '" + name +
                            "'");
        nn::Param<S>* target = nullptr;
        for (size_t i = 0; i < params.size(); ++i)
            if (params[i]->name == name) {
                target = params[i];
                filled[i] = true;
                break;
            }
        if (!target) throw DataError("checkpoint has unknown parameter '" + name + "'");
        if (target->rows != rows || target->cols != cols)
            throw DataError("checkpoint shape mismatch for '" + name + "'");
        target->steps = steps;
        for (auto* arr : {&target->value, &target->m, &target->v}) {
            in.read(reinterpret_cast<char*>(arr->data()),
                    static_cast<std::streamsize>(arr->size() * sizeof(S)));
        }
        if (!in) throw DataError("checkpoint truncated at '" + name + "'");
    }
    for (size_t i = 0; i < params.size(); ++i)
        if (!filled[i])
            throw DataError("checkpoint is missing parameter '" + params[i]->name + "'");
    return meta;
}

}  // namespace contraseg::ckpt
