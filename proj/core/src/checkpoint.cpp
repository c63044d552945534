#include "rbrnet/checkpoint.hpp"

#include <algorithm>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <zlib.h>

#include <nlohmann/json.hpp>

#include "rbrnet/errors.hpp"
#include "rbrnet/rng.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace rbrnet {

namespace {

constexpr char kMagic[4] = {'R', 'B', 'R', 'N'};
constexpr std::uint32_t kFormatVersion = 1;
constexpr std::uint8_t kDtypeF32 = 0;

struct RawTensor {
    std::string name;
    Shape dims;
    std::vector<float> values;
};

// --- little-endian byte stream helpers ---

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_f32(std::vector<std::uint8_t>& out, float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32(out, bits);
}

struct Reader {
    const std::uint8_t* p;
    std::size_t left;

    void need(std::size_t n) const {
        if (left < n) throw CheckpointError(CheckpointError::Kind::BadCrc, "container truncated");
    }
    std::uint16_t u16() {
        need(2);
        std::uint16_t v = static_cast<std::uint16_t>(p[0] | (p[1] << 8));
        p += 2;
        left -= 2;
        return v;
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
        p += 4;
        left -= 4;
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
        p += 8;
        left -= 8;
        return v;
    }
    std::uint8_t u8() {
        need(1);
        std::uint8_t v = *p;
        ++p;
        --left;
        return v;
    }
    std::string str(std::size_t n) {
        need(n);
        std::string s(reinterpret_cast<const char*>(p), n);
        p += n;
        left -= n;
        return s;
    }
    float f32() {
        const std::uint32_t bits = u32();
        float v;
        std::memcpy(&v, &bits, 4);
        return v;
    }
};

std::vector<std::uint8_t> serialize_container(const std::vector<RawTensor>& tensors) {
    std::vector<std::uint8_t> out;
    out.insert(out.end(), kMagic, kMagic + 4);
    put_u32(out, kFormatVersion);
    put_u32(out, static_cast<std::uint32_t>(tensors.size()));
    for (const auto& t : tensors) {
        put_u16(out, static_cast<std::uint16_t>(t.name.size()));
        out.insert(out.end(), t.name.begin(), t.name.end());
        out.push_back(static_cast<std::uint8_t>(t.dims.size()));
        for (std::int64_t d : t.dims) put_u64(out, static_cast<std::uint64_t>(d));
        out.push_back(kDtypeF32);
        for (float v : t.values) put_f32(out, v);
    }
    const std::uint32_t crc =
        static_cast<std::uint32_t>(crc32(0L, out.data(), static_cast<uInt>(out.size())));
    put_u32(out, crc);
    return out;
}

std::vector<RawTensor> parse_container(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() < 16) {
        throw CheckpointError(CheckpointError::Kind::BadMagic, "container too small");
    }
    if (std::memcmp(bytes.data(), kMagic, 4) != 0) {
        throw CheckpointError(CheckpointError::Kind::BadMagic, "bad container magic");
    }
    const std::size_t body = bytes.size() - 4;
    const std::uint32_t want =
        static_cast<std::uint32_t>(crc32(0L, bytes.data(), static_cast<uInt>(body)));
    std::uint32_t got = 0;
    for (int i = 0; i < 4; ++i) got |= static_cast<std::uint32_t>(bytes[body + i]) << (8 * i);
    if (want != got) {
        throw CheckpointError(CheckpointError::Kind::BadCrc, "container CRC mismatch");
    }

    Reader r{bytes.data() + 4, body - 4};
    const std::uint32_t version = r.u32();
    if (version != kFormatVersion) {
        throw CheckpointError(CheckpointError::Kind::BadVersion,
                              "unknown container version " + std::to_string(version));
    }
    const std::uint32_t count = r.u32();
    std::vector<RawTensor> tensors;
    tensors.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        RawTensor t;
        const std::uint16_t name_len = r.u16();
        t.name = r.str(name_len);
        const std::uint8_t ndim = r.u8();
        std::int64_t numel = 1;
        for (std::uint8_t d = 0; d < ndim; ++d) {
            const std::uint64_t dim = r.u64();
            t.dims.push_back(static_cast<std::int64_t>(dim));
            numel *= static_cast<std::int64_t>(dim);
        }
        const std::uint8_t dtype = r.u8();
        if (dtype != kDtypeF32) {
            throw CheckpointError(CheckpointError::Kind::BadVersion,
                                  "unsupported dtype tag " + std::to_string(dtype));
        }
        t.values.resize(static_cast<std::size_t>(numel));
        for (auto& v : t.values) v = r.f32();
        tensors.push_back(std::move(t));
    }
    return tensors;
}

void write_file(const std::string& path, const std::vector<std::uint8_t>& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError(CheckpointError::Kind::Io, "cannot write " + path);
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw CheckpointError(CheckpointError::Kind::Io, "short write to " + path);
}

std::vector<std::uint8_t> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CheckpointError(CheckpointError::Kind::Io, "cannot read " + path);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// --- config <-> json ---

json pool_to_json(const PoolSpec& p) {
    return json{{"kind", p.kind == PoolKind::max ? "max" : "avg"},
                {"window", p.window},
                {"stride", p.stride}};
}

PoolSpec pool_from_json(const json& j) {
    PoolSpec p;
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "max") {
        p.kind = PoolKind::max;
    } else if (kind == "avg") {
        p.kind = PoolKind::avg;
    } else {
        throw CheckpointError(CheckpointError::Kind::BadSidecar, "unknown pool kind " + kind);
    }
    p.window = j.at("window").get<std::int64_t>();
    p.stride = j.at("stride").get<std::int64_t>();
    return p;
}

json config_to_json(const ResBRNetConfig& cfg) {
    json spatial = json::array();
    for (const auto& s : cfg.spatial_blocks) {
        spatial.push_back(
            json{{"filters", s.filters}, {"kernel", s.kernel}, {"pool", pool_to_json(s.pool)}});
    }
    json residual = json::array();
    for (const auto& r : cfg.residual_blocks) {
        json block{{"filters", r.filters}};
        block["downsample"] = r.downsample ? pool_to_json(*r.downsample) : json(nullptr);
        residual.push_back(block);
    }
    json fc = json::array();
    for (const auto& f : cfg.fc) {
        fc.push_back(json{{"width", f.width}, {"dropout_rate", f.dropout_rate}});
    }
    return json{{"input",
                 {{"channels", cfg.in_channels}, {"height", cfg.in_height}, {"width", cfg.in_width}}},
                {"spatial_blocks", spatial},
                {"residual_blocks", residual},
                {"fc", fc},
                {"num_classes", cfg.num_classes},
                {"head_pool", cfg.head_pool == HeadPool::global_avg ? "global_avg" : "flatten"}};
}

ResBRNetConfig config_from_json(const json& j) {
    ResBRNetConfig cfg;
    cfg.in_channels = j.at("input").at("channels").get<std::int64_t>();
    cfg.in_height = j.at("input").at("height").get<std::int64_t>();
    cfg.in_width = j.at("input").at("width").get<std::int64_t>();
    cfg.spatial_blocks.clear();
    for (const auto& s : j.at("spatial_blocks")) {
        cfg.spatial_blocks.push_back({s.at("filters").get<std::int64_t>(),
                                      s.at("kernel").get<std::int64_t>(),
                                      pool_from_json(s.at("pool"))});
    }
    cfg.residual_blocks.clear();
    for (const auto& r : j.at("residual_blocks")) {
        ResidualBlockSpec spec;
        spec.filters = r.at("filters").get<std::int64_t>();
        if (!r.at("downsample").is_null()) spec.downsample = pool_from_json(r.at("downsample"));
        cfg.residual_blocks.push_back(spec);
    }
    cfg.fc.clear();
    for (const auto& f : j.at("fc")) {
        cfg.fc.push_back({f.at("width").get<std::int64_t>(), f.at("dropout_rate").get<double>()});
    }
    cfg.num_classes = j.at("num_classes").get<std::int64_t>();
    cfg.head_pool = j.at("head_pool").get<std::string>() == "flatten" ? HeadPool::flatten
                                                                      : HeadPool::global_avg;
    return cfg;
}

}  // namespace

void save_checkpoint(Model& model, const CheckpointMeta& meta, const std::string& path) {
    std::vector<RawTensor> tensors;
    for (auto& p : model.named_tensors()) {
        RawTensor t;
        t.name = p.name;
        t.dims = p.tensor.shape();
        t.values.assign(p.tensor.data().begin(), p.tensor.data().end());
        tensors.push_back(std::move(t));
    }
    write_file(path, serialize_container(tensors));

    json sidecar{{"format_version", kFormatVersion},
                 {"config", config_to_json(meta.config)},
                 {"class_names", meta.class_names},
                 {"training",
                  {{"epochs_run", meta.epochs_run},
                   {"final_lr", meta.final_lr},
                   {"seed", meta.seed},
                   {"train_fraction", meta.train_fraction},
                   {"val_fraction_of_train", meta.val_fraction_of_train},
                   {"best_epoch", meta.best_epoch},
                   {"best_val_acc", meta.best_val_acc}}}};
    std::ofstream out(path + ".json", std::ios::trunc);
    if (!out) throw CheckpointError(CheckpointError::Kind::Io, "cannot write " + path + ".json");
    out << sidecar.dump(2) << "\n";
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
    json sidecar;
    {
        std::ifstream in(path + ".json");
        if (!in) {
            throw CheckpointError(CheckpointError::Kind::BadSidecar,
                                  "missing sidecar " + path + ".json");
        }
        try {
            in >> sidecar;
        } catch (const json::exception& e) {
            throw CheckpointError(CheckpointError::Kind::BadSidecar,
                                  std::string("malformed sidecar: ") + e.what());
        }
    }

    LoadedCheckpoint loaded;
    try {
        loaded.meta.config = config_from_json(sidecar.at("config"));
        loaded.meta.class_names = sidecar.at("class_names").get<std::vector<std::string>>();
        const auto& training = sidecar.at("training");
        loaded.meta.epochs_run = training.at("epochs_run").get<int>();
        loaded.meta.final_lr = training.at("final_lr").get<double>();
        loaded.meta.seed = training.at("seed").get<std::uint64_t>();
        loaded.meta.train_fraction = training.value("train_fraction", 0.8);
        loaded.meta.val_fraction_of_train = training.value("val_fraction_of_train", 0.1);
        loaded.meta.best_epoch = training.value("best_epoch", -1);
        loaded.meta.best_val_acc = training.value("best_val_acc", 0.0);
    } catch (const json::exception& e) {
        throw CheckpointError(CheckpointError::Kind::BadSidecar,
                              std::string("malformed sidecar: ") + e.what());
    }

    const auto tensors = parse_container(read_file(path));
    loaded.model = Model::build(loaded.meta.config, loaded.meta.seed);

    auto params = loaded.model.named_tensors();
    if (params.size() != tensors.size()) {
        throw CheckpointError(CheckpointError::Kind::BadShape,
                              "container holds " + std::to_string(tensors.size()) +
                                  " tensors, config expects " + std::to_string(params.size()));
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (params[i].name != tensors[i].name) {
            throw CheckpointError(CheckpointError::Kind::BadShape,
                                  "tensor name mismatch: '" + tensors[i].name + "' vs '" +
                                      params[i].name + "'");
        }
        if (params[i].tensor.shape() != tensors[i].dims) {
            throw CheckpointError(CheckpointError::Kind::BadShape,
                                  "shape mismatch for '" + params[i].name + "'");
        }
        std::copy(tensors[i].values.begin(), tensors[i].values.end(),
                  params[i].tensor.data().begin());
    }
    return loaded;
}

std::uint64_t dataset_tree_hash(const std::string& root_dir) {
    if (!fs::is_directory(root_dir)) throw DataError("tree hash: not a directory: " + root_dir);
    std::vector<std::string> rel_paths;
    for (const auto& entry : fs::recursive_directory_iterator(root_dir)) {
        if (entry.is_regular_file()) {
            rel_paths.push_back(fs::relative(entry.path(), root_dir).generic_string());
        }
    }
    std::sort(rel_paths.begin(), rel_paths.end());
    std::uint64_t h = 0x9ae16a3b2f90404fULL;
    for (const auto& rel : rel_paths) {
        uLong crc = crc32(0L, reinterpret_cast<const Bytef*>(rel.data()),
                          static_cast<uInt>(rel.size()));
        const auto bytes = read_file((fs::path(root_dir) / rel).string());
        crc = crc32(crc, bytes.data(), static_cast<uInt>(bytes.size()));
        h = mix_seed(h, static_cast<std::uint64_t>(crc));
    }
    return h;
}

void save_dataset_cache(const LabeledDataset& ds, const std::string& path,
                        std::uint64_t source_hash) {
    std::vector<RawTensor> tensors;
    tensors.reserve(ds.samples.size() + 1);
    for (std::size_t i = 0; i < ds.samples.size(); ++i) {
        RawTensor t;
        t.name = "img/" + std::to_string(i);
        t.dims = ds.samples[i].image.shape();
        t.values.assign(ds.samples[i].image.data().begin(), ds.samples[i].image.data().end());
        tensors.push_back(std::move(t));
    }
    RawTensor labels;
    labels.name = "labels";
    labels.dims = {static_cast<std::int64_t>(ds.samples.size())};
    for (const auto& s : ds.samples) labels.values.push_back(static_cast<float>(s.label));
    tensors.push_back(std::move(labels));
    write_file(path, serialize_container(tensors));

    json sidecar{{"format_version", kFormatVersion},
                 {"class_names", ds.class_names},
                 {"channels", ds.channels},
                 {"height", ds.height},
                 {"width", ds.width},
                 {"source_tree_hash", source_hash}};
    json paths = json::array();
    for (const auto& s : ds.samples) paths.push_back(s.path);
    sidecar["paths"] = paths;
    std::ofstream out(path + ".json", std::ios::trunc);
    if (!out) throw CheckpointError(CheckpointError::Kind::Io, "cannot write " + path + ".json");
    out << sidecar.dump(2) << "\n";
}

std::optional<LabeledDataset> load_dataset_cache(const std::string& path,
                                                 std::uint64_t expected_hash) {
    if (!fs::exists(path) || !fs::exists(path + ".json")) return std::nullopt;
    try {
        json sidecar;
        {
            std::ifstream in(path + ".json");
            in >> sidecar;
        }
        if (sidecar.at("source_tree_hash").get<std::uint64_t>() != expected_hash) {
            return std::nullopt;  // stale
        }
        LabeledDataset ds;
        ds.class_names = sidecar.at("class_names").get<std::vector<std::string>>();
        ds.channels = sidecar.at("channels").get<std::int64_t>();
        ds.height = sidecar.at("height").get<std::int64_t>();
        ds.width = sidecar.at("width").get<std::int64_t>();
        const auto paths = sidecar.at("paths").get<std::vector<std::string>>();

        auto tensors = parse_container(read_file(path));
        if (tensors.empty() || tensors.back().name != "labels" ||
            tensors.size() != paths.size() + 1) {
            throw CheckpointError(CheckpointError::Kind::BadShape, "cache layout mismatch");
        }
        const auto& labels = tensors.back().values;
        for (std::size_t i = 0; i + 1 < tensors.size(); ++i) {
            Sample s;
            s.image = Tensor<float>::from_values(tensors[i].dims, std::move(tensors[i].values));
            s.label = static_cast<int>(labels[i]);
            s.path = paths[i];
            ds.samples.push_back(std::move(s));
        }
        return ds;
    } catch (const std::exception& e) {
        std::cerr << "dataset cache " << path << " unusable (" << e.what() << "), rebuilding\n";
        return std::nullopt;
    }
}

}  // namespace rbrnet
