#include "xsec/data.hpp"

#include "xsec/error.hpp"
#include "xsec/rng.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace xsec {

namespace {

std::string fmt17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

double parse_double(const std::string& cell, std::size_t row, const std::string& col) {
    double v = 0.0;
    const char* first = cell.data();
    const char* last = cell.data() + cell.size();
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc{} || ptr != last) {
        throw ParseError("csv row " + std::to_string(row) + ", column '" + col + "': '" + cell +
                         "' is not numeric");
    }
    return v;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

std::uint32_t read_be32(std::istream& in, const std::string& path, std::size_t offset) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in) {
        throw ParseError("idx file '" + path + "': truncated at offset " + std::to_string(offset));
    }
    return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) | (std::uint32_t(b[2]) << 8) |
           std::uint32_t(b[3]);
}

void write_be32(std::ostream& out, std::uint32_t v) {
    const unsigned char b[4] = {static_cast<unsigned char>(v >> 24),
                                static_cast<unsigned char>(v >> 16),
                                static_cast<unsigned char>(v >> 8),
                                static_cast<unsigned char>(v)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

} // namespace

void Dataset::validate() const {
    if (xs.size() != ys.size()) throw ValidationError("dataset feature/label count mismatch");
    if (!xs.empty()) {
        const auto& shape = xs.front().shape;
        for (const Tensor& x : xs) {
            if (x.shape != shape) throw DimensionError("dataset samples must share one shape");
        }
        if (feature_names.size() != xs.front().size()) {
            throw DimensionError("feature_names length does not match feature dimension");
        }
    }
    for (int y : ys) {
        if (y < 0 || y >= n_classes) throw ValidationError("dataset label out of range");
    }
}

Tensor Dataset::feature_mean() const {
    if (xs.empty()) throw ValidationError("feature_mean of empty dataset");
    std::vector<double> mean(dim(), 0.0);
    for (const Tensor& x : xs) {
        for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += x[i];
    }
    for (double& v : mean) v /= static_cast<double>(xs.size());
    return Tensor::vector(std::move(mean));
}

Dataset gen_planted_tabular(std::size_t n, std::size_t dim, const std::set<std::size_t>& relevant,
                            std::uint64_t seed) {
    if (relevant.empty()) throw ValidationError("planted feature set must not be empty");
    for (std::size_t idx : relevant) {
        if (idx >= dim) throw ValidationError("planted feature index out of range");
    }
    Dataset ds;
    ds.n_classes = 2;
    ds.ground_truth_features = relevant;
    for (std::size_t i = 0; i < dim; ++i) ds.feature_names.push_back("f" + std::to_string(i));
    for (std::size_t s = 0; s < n; ++s) {
        Rng rng = Rng::derive(seed, s);
        std::vector<double> x(dim);
        for (double& v : x) v = rng.uniform(-1.0, 1.0);
        double sum = 0.0;
        for (std::size_t idx : relevant) sum += x[idx];
        ds.ys.push_back(sum > 0.0 ? 1 : 0);
        ds.xs.push_back(Tensor::vector(std::move(x)));
    }
    return ds;
}

Dataset gen_synthetic_digits(std::size_t n, std::size_t grid, std::size_t n_classes,
                             double noise_sigma, std::uint64_t seed) {
    if (grid == 0 || n_classes == 0) throw ValidationError("grid and n_classes must be positive");
    const std::size_t dim = grid * grid;

    // Class templates: a few Gaussian bumps at class-specific spots.
    Rng trng(seed);
    std::vector<std::vector<double>> templates(n_classes, std::vector<double>(dim, 0.0));
    for (std::size_t c = 0; c < n_classes; ++c) {
        const std::size_t n_bumps = 3;
        for (std::size_t b = 0; b < n_bumps; ++b) {
            const double cy = trng.uniform(1.0, static_cast<double>(grid) - 1.0);
            const double cx = trng.uniform(1.0, static_cast<double>(grid) - 1.0);
            const double sigma = trng.uniform(1.0, 1.0 + static_cast<double>(grid) / 6.0);
            const double amp = trng.uniform(0.8, 1.0);
            for (std::size_t r = 0; r < grid; ++r) {
                for (std::size_t col = 0; col < grid; ++col) {
                    const double dy = static_cast<double>(r) - cy;
                    const double dx = static_cast<double>(col) - cx;
                    templates[c][r * grid + col] += amp * std::exp(-(dy * dy + dx * dx) / (2.0 * sigma * sigma));
                }
            }
        }
        for (double& v : templates[c]) v = std::min(1.0, v);
    }

    Dataset ds;
    ds.n_classes = static_cast<int>(n_classes);
    for (std::size_t r = 0; r < grid; ++r) {
        for (std::size_t c = 0; c < grid; ++c) {
            ds.feature_names.push_back("px" + std::to_string(r) + "_" + std::to_string(c));
        }
    }
    for (std::size_t s = 0; s < n; ++s) {
        Rng rng = Rng::derive(seed, s);
        const std::size_t c = static_cast<std::size_t>(rng.below(n_classes));
        std::vector<double> x(dim);
        for (std::size_t i = 0; i < dim; ++i) {
            x[i] = std::clamp(templates[c][i] + noise_sigma * rng.normal(), 0.0, 1.0);
        }
        ds.xs.push_back(Tensor::vector(std::move(x)));
        ds.ys.push_back(static_cast<int>(c));
    }
    return ds;
}

Dataset windowize(const std::vector<int>& events, const SequenceWindowSpec& spec) {
    if (spec.window == 0) throw ValidationError("window must be >= 1");
    if (events.size() <= spec.window) {
        throw ValidationError("need more than " + std::to_string(spec.window) + " events");
    }
    for (int e : events) {
        if (e < 0 || static_cast<std::size_t>(e) >= spec.vocab_size) {
            throw ValidationError("event id " + std::to_string(e) + " outside vocab of " +
                                  std::to_string(spec.vocab_size));
        }
    }
    Dataset ds;
    ds.n_classes = static_cast<int>(spec.vocab_size);
    for (std::size_t p = 0; p < spec.window; ++p) {
        for (std::size_t v = 0; v < spec.vocab_size; ++v) {
            ds.feature_names.push_back("p" + std::to_string(p) + "_e" + std::to_string(v));
        }
    }
    const std::size_t n_samples = events.size() - spec.window;
    for (std::size_t s = 0; s < n_samples; ++s) {
        std::vector<double> x(spec.window * spec.vocab_size, 0.0);
        for (std::size_t p = 0; p < spec.window; ++p) {
            x[p * spec.vocab_size + static_cast<std::size_t>(events[s + p])] = 1.0;
        }
        ds.xs.push_back(Tensor::vector(std::move(x)));
        ds.ys.push_back(events[s + spec.window]);
    }
    return ds;
}

std::vector<int> decode_window(const Tensor& x, std::size_t vocab_size) {
    if (vocab_size == 0 || x.size() % vocab_size != 0) {
        throw DimensionError("input length is not a multiple of vocab_size");
    }
    std::vector<int> events;
    for (std::size_t p = 0; p < x.size() / vocab_size; ++p) {
        const auto begin = x.data.begin() + static_cast<std::ptrdiff_t>(p * vocab_size);
        events.push_back(static_cast<int>(std::max_element(begin, begin + static_cast<std::ptrdiff_t>(vocab_size)) - begin));
    }
    return events;
}

Dataset load_csv(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ParseError("cannot open csv file '" + path + "'");
    std::string line;
    if (!std::getline(f, line)) throw ParseError("csv file '" + path + "' is empty");

    std::vector<std::string> header = split_csv_line(line);
    if (header.size() < 2) throw ParseError("csv header needs at least one feature and a label column");

    Dataset ds;
    ds.feature_names.assign(header.begin(), header.end() - 1);
    const std::size_t n_cols = header.size();

    std::size_t row = 1;
    int max_label = -1;
    while (std::getline(f, line)) {
        ++row;
        if (line.empty()) continue;
        const std::vector<std::string> cells = split_csv_line(line);
        if (cells.size() != n_cols) {
            throw ParseError("csv row " + std::to_string(row) + " has " +
                             std::to_string(cells.size()) + " fields, expected " +
                             std::to_string(n_cols));
        }
        std::vector<double> x(n_cols - 1);
        for (std::size_t c = 0; c + 1 < n_cols; ++c) {
            x[c] = parse_double(cells[c], row, header[c]);
        }
        const double label_raw = parse_double(cells[n_cols - 1], row, header[n_cols - 1]);
        const int label = static_cast<int>(label_raw);
        if (label < 0 || static_cast<double>(label) != label_raw) {
            throw ParseError("csv row " + std::to_string(row) +
                             ": label must be a nonnegative integer, got '" + cells[n_cols - 1] + "'");
        }
        ds.xs.push_back(Tensor::vector(std::move(x)));
        ds.ys.push_back(label);
        max_label = std::max(max_label, label);
    }
    if (ds.xs.empty()) throw ParseError("csv file '" + path + "' has no data rows");
    ds.n_classes = max_label + 1;
    return ds;
}

void save_csv(const Dataset& ds, const std::string& path) {
    ds.validate();
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ValidationError("cannot open '" + path + "' for writing");
    for (std::size_t i = 0; i < ds.feature_names.size(); ++i) {
        f << ds.feature_names[i] << ',';
    }
    f << "label\n";
    for (std::size_t s = 0; s < ds.xs.size(); ++s) {
        for (std::size_t i = 0; i < ds.xs[s].size(); ++i) {
            f << fmt17(ds.xs[s][i]) << ',';
        }
        f << ds.ys[s] << '\n';
    }
    if (!f) throw ValidationError("write to '" + path + "' failed");
}

Dataset load_idx(const std::string& path_images, const std::string& path_labels) {
    std::ifstream fi(path_images, std::ios::binary);
    if (!fi) throw ParseError("cannot open idx image file '" + path_images + "'");
    const std::uint32_t magic_i = read_be32(fi, path_images, 0);
    if (magic_i != 0x00000803u) {
        throw ParseError("idx file '" + path_images + "': bad image magic at offset 0");
    }
    const std::uint32_t n = read_be32(fi, path_images, 4);
    const std::uint32_t rows = read_be32(fi, path_images, 8);
    const std::uint32_t cols = read_be32(fi, path_images, 12);
    const std::size_t dim = static_cast<std::size_t>(rows) * cols;

    std::ifstream fl(path_labels, std::ios::binary);
    if (!fl) throw ParseError("cannot open idx label file '" + path_labels + "'");
    const std::uint32_t magic_l = read_be32(fl, path_labels, 0);
    if (magic_l != 0x00000801u) {
        throw ParseError("idx file '" + path_labels + "': bad label magic at offset 0");
    }
    const std::uint32_t n_labels = read_be32(fl, path_labels, 4);
    if (n != n_labels) {
        throw ParseError("idx image count " + std::to_string(n) + " != label count " +
                         std::to_string(n_labels));
    }

    Dataset ds;
    for (std::uint32_t r = 0; r < rows; ++r) {
        for (std::uint32_t c = 0; c < cols; ++c) {
            ds.feature_names.push_back("px" + std::to_string(r) + "_" + std::to_string(c));
        }
    }
    std::vector<unsigned char> buf(dim);
    int max_label = -1;
    for (std::uint32_t s = 0; s < n; ++s) {
        fi.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(dim));
        if (!fi) {
            throw ParseError("idx file '" + path_images + "': truncated in image " + std::to_string(s));
        }
        std::vector<double> x(dim);
        for (std::size_t i = 0; i < dim; ++i) x[i] = static_cast<double>(buf[i]) / 255.0;
        ds.xs.push_back(Tensor::vector(std::move(x)));

        char lb;
        fl.read(&lb, 1);
        if (!fl) {
            throw ParseError("idx file '" + path_labels + "': truncated at label " + std::to_string(s));
        }
        const int label = static_cast<unsigned char>(lb);
        ds.ys.push_back(label);
        max_label = std::max(max_label, label);
    }
    ds.n_classes = max_label + 1;
    return ds;
}

void save_idx(const Dataset& ds, std::size_t rows, std::size_t cols,
              const std::string& path_images, const std::string& path_labels) {
    ds.validate();
    if (rows * cols != ds.dim()) throw DimensionError("rows*cols must equal feature dimension");
    std::ofstream fi(path_images, std::ios::binary);
    std::ofstream fl(path_labels, std::ios::binary);
    if (!fi || !fl) throw ValidationError("cannot open idx output files");
    write_be32(fi, 0x00000803u);
    write_be32(fi, static_cast<std::uint32_t>(ds.size()));
    write_be32(fi, static_cast<std::uint32_t>(rows));
    write_be32(fi, static_cast<std::uint32_t>(cols));
    write_be32(fl, 0x00000801u);
    write_be32(fl, static_cast<std::uint32_t>(ds.size()));
    for (std::size_t s = 0; s < ds.size(); ++s) {
        for (std::size_t i = 0; i < ds.dim(); ++i) {
            const double v = std::clamp(ds.xs[s][i], 0.0, 1.0);
            const unsigned char byte = static_cast<unsigned char>(std::lround(v * 255.0));
            fi.write(reinterpret_cast<const char*>(&byte), 1);
        }
        const unsigned char label = static_cast<unsigned char>(ds.ys[s]);
        fl.write(reinterpret_cast<const char*>(&label), 1);
    }
    if (!fi || !fl) throw ValidationError("idx write failed");
}

std::vector<std::vector<int>> load_sequences(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ParseError("cannot open sequence file '" + path + "'");
    std::vector<std::vector<int>> sessions;
    std::string line;
    std::size_t row = 0;
    while (std::getline(f, line)) {
        ++row;
        if (line.empty() || line == "\r") continue;
        std::istringstream ss(line);
        std::vector<int> session;
        std::string tok;
        while (ss >> tok) {
            int v = 0;
            auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
            if (ec != std::errc{} || ptr != tok.data() + tok.size() || v < 0) {
                throw ParseError("sequence file row " + std::to_string(row) + ": '" + tok +
                                 "' is not a nonnegative integer event id");
            }
            session.push_back(v);
        }
        sessions.push_back(std::move(session));
    }
    return sessions;
}

void save_sequences(const std::vector<std::vector<int>>& sessions, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ValidationError("cannot open '" + path + "' for writing");
    for (const auto& session : sessions) {
        for (std::size_t i = 0; i < session.size(); ++i) {
            if (i) f << ' ';
            f << session[i];
        }
        f << '\n';
    }
    if (!f) throw ValidationError("write to '" + path + "' failed");
}

} // namespace xsec
