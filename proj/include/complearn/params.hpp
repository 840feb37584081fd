#pragma once
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "complearn/tensor.hpp"

namespace complearn::nn {

// Named parameter tree. Registration order is fixed by model construction,
// which makes initialization and EMA updates deterministic.
class ModelParams {
public:
    struct Entry {
        std::string name;
        ad::Shape shape;
        std::vector<double> value;
    };

    void add(const std::string& name, ad::Shape shape, std::vector<double> value);
    bool contains(const std::string& name) const;
    Entry& entry(const std::string& name);
    const Entry& entry(const std::string& name) const;

    std::vector<Entry>& entries() { return entries_; }
    const std::vector<Entry>& entries() const { return entries_; }
    size_t size() const { return entries_.size(); }

    // Leaf tensor over the current value. Grad-enabled leaves copy the data
    // so optimizer updates cannot alias a live tape.
    ad::Tensor leaf(const std::string& name, bool grad) const;

    // Parameters whose name starts with `prefix`.
    std::vector<std::string> names_with_prefix(const std::string& prefix) const;

    int64_t total_count() const;

    bool operator==(const ModelParams& other) const;

    void save(std::ostream& os) const;
    static ModelParams load(std::istream& is);

private:
    std::vector<Entry> entries_;
};

// Binary checkpoint primitives shared by params and trainer state.
namespace io {
void write_u64(std::ostream& os, uint64_t v);
void write_f64(std::ostream& os, double v);
void write_string(std::ostream& os, const std::string& s);
void write_f64_vec(std::ostream& os, const std::vector<double>& v);
uint64_t read_u64(std::istream& is);
double read_f64(std::istream& is);
std::string read_string(std::istream& is);
std::vector<double> read_f64_vec(std::istream& is);
}  // namespace io

}  // namespace complearn::nn
