#include "contraseg/dataio.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

namespace contraseg::io {

namespace fs = std::filesystem;

namespace {

// Frame range of downsample chunk i when mapping t_in frames onto t_out.
inline std::pair<int, int> chunk_bounds(int i, int t_in, int t_out) {
    const int lo = static_cast<int>((static_cast<int64_t>(i) * t_in) / t_out);
    const int hi = static_cast<int>((static_cast<int64_t>(i + 1) * t_in) / t_out);
    return {lo, hi};
}

}  // namespace

DownsampledSequence downsample(const FeatureSequence& seq, int target_T) {
    if (target_T < 1) throw DataError("downsample target must be >= 1");
    const int t_in = seq.frames();
    const int f = seq.dim();

    DownsampledSequence out;
    out.t_original = t_in;
    out.features = MatD(target_T, f);
    out.degraded = target_T > t_in;
    if (seq.labels) out.labels = std::vector<int>(target_T);

    for (int i = 0; i < target_T; ++i) {
        auto [lo, hi] = chunk_bounds(i, t_in, target_T);
        if (lo >= hi) {
            // Empty chunk (target longer than source): repeat the nearest frame.
            const int src = std::min(lo, t_in - 1);
            for (int k = 0; k < f; ++k) out.features.at(i, k) = seq.features.at(src, k);
            if (out.labels) (*out.labels)[i] = (*seq.labels)[src];
            continue;
        }
        for (int k = 0; k < f; ++k) {
            double acc = 0.0;
            for (int t = lo; t < hi; ++t) acc += seq.features.at(t, k);
            out.features.at(i, k) = acc / (hi - lo);
        }
        if (out.labels) {
            // Majority vote; ties resolved by the label seen earliest in the chunk.
            std::map<int, int> counts;
            for (int t = lo; t < hi; ++t) ++counts[(*seq.labels)[t]];
            int best = -1, best_count = -1;
            for (int t = lo; t < hi; ++t) {
                const int y = (*seq.labels)[t];
                if (counts[y] > best_count) {
                    best = y;
                    best_count = counts[y];
                }
            }
            (*out.labels)[i] = best;
        }
    }
    return out;
}

std::vector<int> upsample_predictions(const std::vector<int>& pred, int t_original) {
    if (pred.empty()) throw DataError("cannot upsample an empty prediction");
    if (t_original < 1) throw DataError("t_original must be >= 1");
    const int t = static_cast<int>(pred.size());
    std::vector<int> out(t_original);
    for (int i = 0; i < t_original; ++i)
        out[i] = pred[static_cast<size_t>((static_cast<int64_t>(i) * t) / t_original)];
    return out;
}

// ----------------------------------------------------------------------------
// File helpers
// ----------------------------------------------------------------------------

void write_feature_file(const fs::path& features_dir, const std::string& video_id,
                        const MatD& features) {
    fs::create_directories(features_dir);
    {
        std::ofstream bin(features_dir / (video_id + ".bin"), std::ios::binary);
        if (!bin) throw DataError("cannot write " + (features_dir / (video_id + ".bin")).string());
        std::vector<float> row(features.cols);
        for (int r = 0; r < features.rows; ++r) {
            for (int c = 0; c < features.cols; ++c) row[c] = static_cast<float>(features.at(r, c));
            bin.write(reinterpret_cast<const char*>(row.data()),
                      static_cast<std::streamsize>(row.size() * sizeof(float)));
        }
    }
    nlohmann::json j;
    j["frames"] = features.rows;
    j["dim"] = features.cols;
    std::ofstream side(features_dir / (video_id + ".json"));
    side << j.dump() << "\n";
}

MatD read_feature_file(const fs::path& features_dir, const std::string& video_id) {
    const fs::path side_path = features_dir / (video_id + ".json");
    std::ifstream side(side_path);
    if (!side) throw DataError("missing feature sidecar: " + side_path.string());
    nlohmann::json j;
    try {
        side >> j;
    } catch (const nlohmann::json::exception& e) {
        throw DataError("bad sidecar " + side_path.string() + ": " + e.what());
    }
    const int frames = j.at("frames").get<int>();
    const int dim = j.at("dim").get<int>();
    if (frames < 1 || dim < 1)
        throw DataError("bad sidecar " + side_path.string() + ": nonpositive shape");

    const fs::path bin_path = features_dir / (video_id + ".bin");
    std::ifstream bin(bin_path, std::ios::binary);
    if (!bin) throw DataError("missing feature file: " + bin_path.string());
    std::vector<float> raw(static_cast<size_t>(frames) * dim);
    bin.read(reinterpret_cast<char*>(raw.data()),
             static_cast<std::streamsize>(raw.size() * sizeof(float)));
    if (bin.gcount() != static_cast<std::streamsize>(raw.size() * sizeof(float)))
        throw DataError("feature file truncated: " + bin_path.string());

    MatD out(frames, dim);
    for (size_t i = 0; i < raw.size(); ++i) out.v[i] = static_cast<double>(raw[i]);
    return out;
}

void write_label_file(const fs::path& path, const std::vector<int>& labels,
                      const std::vector<std::string>& class_names) {
    fs::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    for (int y : labels) {
        if (y < 0 || y >= static_cast<int>(class_names.size()))
            throw DataError("label id " + std::to_string(y) + " has no class name");
        out << class_names[y] << "\n";
    }
}

std::vector<int> read_label_file(const fs::path& path,
                                 const std::vector<std::string>& class_names) {
    std::ifstream in(path);
    if (!in) throw DataError("missing label file: " + path.string());
    std::map<std::string, int> ids;
    for (size_t i = 0; i < class_names.size(); ++i) ids[class_names[i]] = static_cast<int>(i);

    std::vector<int> labels;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto it = ids.find(line);
        if (it == ids.end())
            throw DataError("unknown label '" + line + "' in " + path.string() +
                            " (not present in mapping.txt)");
        labels.push_back(it->second);
    }
    if (labels.empty()) throw DataError("label file is empty: " + path.string());
    return labels;
}

void write_mapping(const fs::path& path, const std::vector<std::string>& class_names) {
    fs::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    for (size_t i = 0; i < class_names.size(); ++i) out << i << " " << class_names[i] << "\n";
}

std::vector<std::string> read_mapping(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("missing mapping file: " + path.string());
    std::vector<std::string> names;
    std::string line;
    int expected = 0;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::istringstream ss(line);
        int id = -1;
        std::string name;
        ss >> id >> name;
        if (!ss || name.empty())
            throw DataError("bad mapping line '" + line + "' in " + path.string());
        if (id != expected)
            throw DataError("mapping ids must be contiguous from 0; got " + std::to_string(id) +
                            " expecting " + std::to_string(expected));
        names.push_back(name);
        ++expected;
    }
    if (names.empty()) throw DataError("mapping file is empty: " + path.string());
    return names;
}

DatasetSplit load_dataset(const fs::path& root_dir, double labelled_fraction, uint64_t seed) {
    const fs::path features_dir = root_dir / "features";
    const fs::path gt_dir = root_dir / "groundTruth";
    if (!fs::is_directory(features_dir))
        throw DataError("missing features/ directory under " + root_dir.string());
    if (!fs::is_directory(gt_dir))
        throw DataError("missing groundTruth/ directory under " + root_dir.string());

    std::vector<std::string> class_names = read_mapping(root_dir / "mapping.txt");
    const int num_classes = static_cast<int>(class_names.size());

    std::vector<std::string> ids;
    for (const auto& entry : fs::directory_iterator(features_dir))
        if (entry.path().extension() == ".bin") ids.push_back(entry.path().stem().string());
    if (ids.empty()) throw DataError("no feature files under " + features_dir.string());
    std::sort(ids.begin(), ids.end());

    std::vector<FeatureSequence> videos;
    videos.reserve(ids.size());
    for (const auto& id : ids) {
        MatD features = read_feature_file(features_dir, id);
        std::vector<int> labels = read_label_file(gt_dir / (id + ".txt"), class_names);
        if (static_cast<int>(labels.size()) != features.rows)
            throw DataError("video '" + id + "': " + std::to_string(features.rows) +
                            " feature frames but " + std::to_string(labels.size()) +
                            " label lines");
        videos.push_back(FeatureSequence::make(id, std::move(features), std::move(labels),
                                               num_classes, (features_dir / (id + ".bin")).string()));
    }
    return make_split(std::move(videos), std::move(class_names), labelled_fraction, seed);
}

}  // namespace contraseg::io
