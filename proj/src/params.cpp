#include "complearn/params.hpp"

#include <cstring>
#include <istream>
#include <ostream>
#include <unordered_map>

namespace complearn::nn {

void ModelParams::add(const std::string& name, ad::Shape shape, std::vector<double> value) {
    if (contains(name)) throw ad::TensorError("ModelParams: duplicate parameter '" + name + "'");
    if (ad::numel_of(shape) != int64_t(value.size())) {
        throw ad::TensorError("ModelParams: shape/value mismatch for '" + name + "'");
    }
    entries_.push_back(Entry{name, std::move(shape), std::move(value)});
}

bool ModelParams::contains(const std::string& name) const {
    for (const auto& e : entries_)
        if (e.name == name) return true;
    return false;
}

ModelParams::Entry& ModelParams::entry(const std::string& name) {
    for (auto& e : entries_)
        if (e.name == name) return e;
    throw ad::TensorError("ModelParams: unknown parameter '" + name + "'");
}

const ModelParams::Entry& ModelParams::entry(const std::string& name) const {
    for (const auto& e : entries_)
        if (e.name == name) return e;
    throw ad::TensorError("ModelParams: unknown parameter '" + name + "'");
}

ad::Tensor ModelParams::leaf(const std::string& name, bool grad) const {
    const Entry& e = entry(name);
    if (grad) return ad::Tensor::param(e.name, e.shape, e.value);
    return ad::Tensor::constant(e.shape, e.value);
}

std::vector<std::string> ModelParams::names_with_prefix(const std::string& prefix) const {
    std::vector<std::string> out;
    for (const auto& e : entries_)
        if (e.name.rfind(prefix, 0) == 0) out.push_back(e.name);
    return out;
}

int64_t ModelParams::total_count() const {
    int64_t n = 0;
    for (const auto& e : entries_) n += int64_t(e.value.size());
    return n;
}

bool ModelParams::operator==(const ModelParams& other) const {
    if (entries_.size() != other.entries_.size()) return false;
    for (size_t i = 0; i < entries_.size(); ++i) {
        const auto& a = entries_[i];
        const auto& b = other.entries_[i];
        if (a.name != b.name || a.shape != b.shape) return false;
        if (std::memcmp(a.value.data(), b.value.data(), a.value.size() * sizeof(double)) != 0)
            return false;
    }
    return true;
}

namespace io {

void write_u64(std::ostream& os, uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = (unsigned char)((v >> (8 * i)) & 0xff);
    os.write(reinterpret_cast<const char*>(b), 8);
}

void write_f64(std::ostream& os, double v) {
    uint64_t bits;
    std::memcpy(&bits, &v, 8);
    write_u64(os, bits);
}

void write_string(std::ostream& os, const std::string& s) {
    write_u64(os, s.size());
    os.write(s.data(), std::streamsize(s.size()));
}

void write_f64_vec(std::ostream& os, const std::vector<double>& v) {
    write_u64(os, v.size());
    for (double x : v) write_f64(os, x);
}

uint64_t read_u64(std::istream& is) {
    unsigned char b[8];
    is.read(reinterpret_cast<char*>(b), 8);
    if (!is) throw ad::TensorError("checkpoint: truncated file");
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= uint64_t(b[i]) << (8 * i);
    return v;
}

double read_f64(std::istream& is) {
    uint64_t bits = read_u64(is);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
}

std::string read_string(std::istream& is) {
    uint64_t n = read_u64(is);
    std::string s(n, '\0');
    is.read(s.data(), std::streamsize(n));
    if (!is) throw ad::TensorError("checkpoint: truncated string");
    return s;
}

std::vector<double> read_f64_vec(std::istream& is) {
    uint64_t n = read_u64(is);
    std::vector<double> v(n);
    for (uint64_t i = 0; i < n; ++i) v[i] = read_f64(is);
    return v;
}

}  // namespace io

void ModelParams::save(std::ostream& os) const {
    io::write_u64(os, entries_.size());
    for (const auto& e : entries_) {
        io::write_string(os, e.name);
        io::write_u64(os, e.shape.size());
        for (int d : e.shape) io::write_u64(os, uint64_t(d));
        io::write_f64_vec(os, e.value);
    }
}

ModelParams ModelParams::load(std::istream& is) {
    ModelParams p;
    uint64_t n = io::read_u64(is);
    for (uint64_t i = 0; i < n; ++i) {
        std::string name = io::read_string(is);
        uint64_t nd = io::read_u64(is);
        ad::Shape shape(nd);
        for (uint64_t d = 0; d < nd; ++d) shape[d] = int(io::read_u64(is));
        std::vector<double> value = io::read_f64_vec(is);
        p.add(name, std::move(shape), std::move(value));
    }
    return p;
}

}  // namespace complearn::nn
