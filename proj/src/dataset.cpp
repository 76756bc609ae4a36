#include "otafl/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>

#include "otafl/rng.hpp"

namespace otafl {

namespace {

void shuffle(std::vector<std::size_t>& v, RngStream& rng) {
    for (std::size_t i = v.size(); i > 1; --i) {
        const std::size_t j = rng.below(i);
        std::swap(v[i - 1], v[j]);
    }
}

std::vector<std::vector<std::size_t>> rows_by_class(const Dataset& data) {
    std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(data.num_classes));
    for (std::size_t i = 0; i < data.size(); ++i) {
        const int c = data.labels[i];
        if (c < 0 || c >= data.num_classes) throw std::invalid_argument("label out of range");
        by_class[static_cast<std::size_t>(c)].push_back(i);
    }
    return by_class;
}

std::uint32_t read_be32(std::istream& in) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4)) throw std::runtime_error("truncated IDX header");
    return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) | (std::uint32_t{b[2]} << 8) | b[3];
}

}  // namespace

Dataset Dataset::subset(const std::vector<std::size_t>& rows) const {
    Dataset out;
    out.num_classes = num_classes;
    out.owner = owner;
    out.features.resize(static_cast<Eigen::Index>(rows.size()), features.cols());
    out.labels.reserve(rows.size());
    out.source_index.reserve(rows.size());
    for (std::size_t k = 0; k < rows.size(); ++k) {
        const std::size_t r = rows[k];
        out.features.row(static_cast<Eigen::Index>(k)) = features.row(static_cast<Eigen::Index>(r));
        out.labels.push_back(labels.at(r));
        out.source_index.push_back(source_index.empty() ? r : source_index[r]);
    }
    return out;
}

std::vector<int> Dataset::label_set() const {
    std::set<int> s(labels.begin(), labels.end());
    return {s.begin(), s.end()};
}

Dataset make_synthetic(const SyntheticSpec& spec) {
    if (spec.classes < 2 || spec.features < 1 || spec.samples_per_class < 1) {
        throw std::invalid_argument("synthetic dataset needs >= 2 classes, >= 1 feature and >= 1 sample per class");
    }
    const auto c_count = static_cast<std::size_t>(spec.classes);
    const auto f_count = static_cast<Eigen::Index>(spec.features);
    Eigen::MatrixXd centroids(static_cast<Eigen::Index>(c_count), f_count);
    for (std::size_t c = 0; c < c_count; ++c) {
        RngStream rng(spec.seed, Purpose::Data, 0, c);
        for (Eigen::Index f = 0; f < f_count; ++f) centroids(static_cast<Eigen::Index>(c), f) = spec.separation * rng.normal();
    }
    Dataset data;
    data.num_classes = spec.classes;
    const std::size_t n = c_count * static_cast<std::size_t>(spec.samples_per_class);
    data.features.resize(static_cast<Eigen::Index>(n), f_count);
    data.labels.resize(n);
    data.source_index.resize(n);
    std::size_t row = 0;
    for (std::size_t c = 0; c < c_count; ++c) {
        RngStream rng(spec.seed, Purpose::Data, 1, c);
        for (int s = 0; s < spec.samples_per_class; ++s, ++row) {
            for (Eigen::Index f = 0; f < f_count; ++f) {
                data.features(static_cast<Eigen::Index>(row), f) = centroids(static_cast<Eigen::Index>(c), f) + rng.normal();
            }
            data.labels[row] = static_cast<int>(c);
            data.source_index[row] = row;
        }
    }
    return data;
}

TrainTestSplit split_train_test(const Dataset& data, double test_fraction, std::uint64_t seed) {
    if (!(test_fraction >= 0.0 && test_fraction < 1.0)) throw std::invalid_argument("test_fraction must be in [0, 1)");
    auto by_class = rows_by_class(data);
    std::vector<std::size_t> train_rows;
    std::vector<std::size_t> test_rows;
    for (std::size_t c = 0; c < by_class.size(); ++c) {
        auto& rows = by_class[c];
        RngStream rng(seed, Purpose::Partition, 0, c);
        shuffle(rows, rng);
        const auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(rows.size())));
        test_rows.insert(test_rows.end(), rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(n_test));
        train_rows.insert(train_rows.end(), rows.begin() + static_cast<std::ptrdiff_t>(n_test), rows.end());
    }
    std::sort(train_rows.begin(), train_rows.end());
    std::sort(test_rows.begin(), test_rows.end());
    return {data.subset(train_rows), data.subset(test_rows)};
}

std::vector<Dataset> partition_noniid(const Dataset& data, std::size_t n_devices, int labels_per_device,
                                      std::uint64_t seed) {
    if (n_devices == 0) throw std::invalid_argument("partition needs at least one device");
    if (labels_per_device < 1) throw std::invalid_argument("labels_per_device must be positive");
    const auto k = static_cast<std::size_t>(labels_per_device);
    const auto classes = static_cast<std::size_t>(data.num_classes);
    const std::size_t shards = n_devices * k;
    if (shards < classes) {
        throw std::invalid_argument("infeasible partition: " + std::to_string(n_devices) + " devices x " +
                                    std::to_string(k) + " labels cannot cover " + std::to_string(classes) +
                                    " classes");
    }
    if (shards > 2 * classes) {
        throw std::invalid_argument("infeasible partition: " + std::to_string(shards) +
                                    " label slots would put some label on more than two devices");
    }
    if (n_devices == 1 && k > 1 && shards > classes) {
        throw std::invalid_argument("infeasible partition: a single device cannot hold a label twice");
    }

    auto by_class = rows_by_class(data);
    std::vector<std::size_t> label_order(classes);
    std::iota(label_order.begin(), label_order.end(), 0);
    RngStream rng(seed, Purpose::Partition, 1, 0);
    shuffle(label_order, rng);

    // The first (shards - classes) labels in the shuffled order are split over two devices.
    const std::size_t doubled = shards - classes;
    std::vector<std::size_t> multiplicity(classes, 1);
    for (std::size_t i = 0; i < doubled; ++i) multiplicity[label_order[i]] = 2;

    std::size_t shard_size = SIZE_MAX;
    for (std::size_t c = 0; c < classes; ++c) shard_size = std::min(shard_size, by_class[c].size() / multiplicity[c]);
    if (shard_size == 0) throw std::invalid_argument("infeasible partition: some label has too few samples");

    // Shards of one label are adjacent; device i takes shards i, i+N, i+2N, ...
    // which are at least N >= 2 apart and therefore carry distinct labels.
    struct Shard {
        std::size_t label;
        std::size_t part;
    };
    std::vector<Shard> shard_list;
    for (std::size_t c : label_order) {
        for (std::size_t j = 0; j < multiplicity[c]; ++j) shard_list.push_back({c, j});
    }
    for (std::size_t c = 0; c < classes; ++c) {
        RngStream srng(seed, Purpose::Partition, 2, c);
        shuffle(by_class[c], srng);
    }

    std::vector<Dataset> parts;
    parts.reserve(n_devices);
    for (std::size_t dev = 0; dev < n_devices; ++dev) {
        std::vector<std::size_t> rows;
        for (std::size_t j = 0; j < k; ++j) {
            const Shard& s = shard_list[dev + j * n_devices];
            const auto& pool = by_class[s.label];
            rows.insert(rows.end(), pool.begin() + static_cast<std::ptrdiff_t>(s.part * shard_size),
                        pool.begin() + static_cast<std::ptrdiff_t>((s.part + 1) * shard_size));
        }
        std::sort(rows.begin(), rows.end());
        Dataset part = data.subset(rows);
        part.owner = static_cast<int>(dev);
        parts.push_back(std::move(part));
    }
    return parts;
}

nlohmann::json partition_manifest(const std::vector<Dataset>& parts) {
    nlohmann::json devices = nlohmann::json::array();
    for (const auto& p : parts) {
        devices.push_back({{"device", p.owner}, {"labels", p.label_set()}, {"samples", p.source_index}});
    }
    return {{"devices", devices}};
}

Dataset load_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::vector<std::vector<double>> rows;
    std::vector<int> labels;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::vector<double> values;
        bool numeric = true;
        while (std::getline(ss, cell, ',')) {
            try {
                std::size_t used = 0;
                values.push_back(std::stod(cell, &used));
            } catch (const std::exception&) {
                numeric = false;
                break;
            }
        }
        if (!numeric) {
            if (first) {
                first = false;
                continue;
            }
            throw std::runtime_error("non-numeric row in " + path.string());
        }
        first = false;
        if (values.size() < 2) throw std::runtime_error("row needs a label and at least one feature");
        if (!rows.empty() && values.size() - 1 != rows.front().size()) throw std::runtime_error("ragged CSV rows");
        labels.push_back(static_cast<int>(values.front()));
        rows.emplace_back(values.begin() + 1, values.end());
    }
    if (rows.empty()) throw std::runtime_error("empty dataset " + path.string());
    Dataset data;
    data.features.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t j = 0; j < rows[i].size(); ++j) data.features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    }
    data.labels = std::move(labels);
    data.num_classes = *std::max_element(data.labels.begin(), data.labels.end()) + 1;
    data.source_index.resize(data.labels.size());
    std::iota(data.source_index.begin(), data.source_index.end(), 0);
    return data;
}

Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels) {
    std::ifstream img(images, std::ios::binary);
    std::ifstream lab(labels, std::ios::binary);
    if (!img || !lab) throw std::runtime_error("cannot open IDX files");
    if (read_be32(img) != 0x00000803u) throw std::runtime_error("bad IDX image magic");
    const std::uint32_t n = read_be32(img);
    const std::uint32_t rows = read_be32(img);
    const std::uint32_t cols = read_be32(img);
    if (read_be32(lab) != 0x00000801u) throw std::runtime_error("bad IDX label magic");
    if (read_be32(lab) != n) throw std::runtime_error("IDX image/label count mismatch");
    const std::size_t pixels = std::size_t{rows} * cols;
    Dataset data;
    data.features.resize(n, static_cast<Eigen::Index>(pixels));
    data.labels.resize(n);
    std::vector<unsigned char> buf(pixels);
    for (std::uint32_t i = 0; i < n; ++i) {
        if (!img.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(pixels))) {
            throw std::runtime_error("truncated IDX images");
        }
        for (std::size_t j = 0; j < pixels; ++j) data.features(i, static_cast<Eigen::Index>(j)) = buf[j] / 255.0;
        char l = 0;
        if (!lab.get(l)) throw std::runtime_error("truncated IDX labels");
        data.labels[i] = static_cast<unsigned char>(l);
    }
    data.num_classes = *std::max_element(data.labels.begin(), data.labels.end()) + 1;
    data.source_index.resize(n);
    std::iota(data.source_index.begin(), data.source_index.end(), 0);
    return data;
}

}  // namespace otafl
