#include "dbn/potential.hpp"

#include <algorithm>
#include <cassert>

namespace dbn {

namespace {

std::size_t table_size(std::span<const int> cards) {
    std::size_t n = 1;
    for (int c : cards) n *= static_cast<std::size_t>(c);
    return n;
}

// Row-major strides of `sub` within iteration over `full`; 0 for nodes that
// are summed out. `sub` must be a subset of `full`, both sorted.
std::vector<std::size_t> sub_strides(std::span<const int> full_nodes,
                                     std::span<const int> full_cards,
                                     std::span<const int> sub_nodes) {
    std::vector<std::size_t> strides(full_nodes.size(), 0);
    std::size_t stride = 1;
    auto pos = sub_nodes.size();
    for (std::size_t j = full_nodes.size(); j-- > 0;) {
        if (pos > 0 && full_nodes[j] == sub_nodes[pos - 1]) {
            --pos;
            strides[j] = stride;
            stride *= static_cast<std::size_t>(full_cards[j]);
        }
    }
    assert(pos == 0 && "sub scope not contained in full scope");
    return strides;
}

// Odometer over the cells of a table; `on_cell(cell, sub_index)` is called
// with the running index into the subset table described by `strides`.
template <typename Fn>
void for_each_cell(std::span<const int> cards,
                   std::span<const std::size_t> strides, Fn&& on_cell) {
    const std::size_t total = table_size(cards);
    const std::size_t k = cards.size();
    std::vector<int> digits(k, 0);
    std::size_t sub = 0;
    for (std::size_t cell = 0; cell < total; ++cell) {
        on_cell(cell, sub);
        for (std::size_t j = k; j-- > 0;) {
            if (++digits[j] < cards[j]) {
                sub += strides[j];
                break;
            }
            digits[j] = 0;
            sub -= strides[j] * static_cast<std::size_t>(cards[j] - 1);
        }
    }
}

} // namespace

Potential::Potential(std::vector<int> nodes, std::vector<int> cards,
                     double fill)
    : nodes_(std::move(nodes)), cards_(std::move(cards)) {
    assert(std::is_sorted(nodes_.begin(), nodes_.end()));
    table_.assign(table_size(cards_), fill);
}

bool Potential::contains(std::span<const int> nodes) const {
    return std::includes(nodes_.begin(), nodes_.end(), nodes.begin(),
                         nodes.end());
}

void Potential::multiply(const Potential& other) {
    const auto strides = sub_strides(nodes_, cards_, other.nodes_);
    const double* src = other.table_.data();
    double* dst = table_.data();
    for_each_cell(cards_, strides, [&](std::size_t cell, std::size_t sub) {
        dst[cell] *= src[sub];
    });
}

Potential Potential::marginal_onto(std::span<const int> target) const {
    std::vector<int> tcards(target.size());
    for (std::size_t i = 0; i < target.size(); ++i) {
        auto it = std::lower_bound(nodes_.begin(), nodes_.end(), target[i]);
        assert(it != nodes_.end() && *it == target[i]);
        tcards[i] = cards_[it - nodes_.begin()];
    }
    Potential out(std::vector<int>(target.begin(), target.end()),
                  std::move(tcards), 0.0);
    const auto strides = sub_strides(nodes_, cards_, target);
    const double* src = table_.data();
    double* dst = out.table_.data();
    for_each_cell(cards_, strides, [&](std::size_t cell, std::size_t sub) {
        dst[sub] += src[cell];
    });
    return out;
}

std::vector<double> Potential::marginal_in_order(
    std::span<const int> query) const {
    std::vector<int> sorted(query.begin(), query.end());
    std::sort(sorted.begin(), sorted.end());
    Potential m = marginal_onto(sorted);

    // Permute from sorted layout to the requested order.
    std::vector<std::size_t> strides_sorted(query.size());
    {
        std::size_t s = 1;
        for (std::size_t j = m.nodes_.size(); j-- > 0;) {
            strides_sorted[j] = s;
            s *= static_cast<std::size_t>(m.cards_[j]);
        }
    }
    std::vector<std::size_t> out_stride_of_sorted(query.size());
    std::vector<int> qcards(query.size());
    for (std::size_t i = 0; i < query.size(); ++i) {
        auto it = std::lower_bound(m.nodes_.begin(), m.nodes_.end(), query[i]);
        qcards[i] = m.cards_[it - m.nodes_.begin()];
    }
    {
        std::size_t s = 1;
        for (std::size_t i = query.size(); i-- > 0;) {
            auto it = std::lower_bound(m.nodes_.begin(), m.nodes_.end(),
                                       query[i]);
            out_stride_of_sorted[it - m.nodes_.begin()] = s;
            s *= static_cast<std::size_t>(qcards[i]);
        }
    }
    std::vector<double> out(m.size());
    std::vector<int> digits(m.nodes_.size(), 0);
    std::size_t oidx = 0;
    for (std::size_t cell = 0; cell < m.size(); ++cell) {
        out[oidx] = m.table_[cell];
        for (std::size_t j = m.nodes_.size(); j-- > 0;) {
            if (++digits[j] < m.cards_[j]) {
                oidx += out_stride_of_sorted[j];
                break;
            }
            digits[j] = 0;
            oidx -= out_stride_of_sorted[j] *
                    static_cast<std::size_t>(m.cards_[j] - 1);
        }
    }
    return out;
}

void Potential::condition(int node, int value) {
    auto it = std::lower_bound(nodes_.begin(), nodes_.end(), node);
    assert(it != nodes_.end() && *it == node);
    const std::size_t j = it - nodes_.begin();
    std::size_t stride = 1;
    for (std::size_t i = nodes_.size(); i-- > j + 1;)
        stride *= static_cast<std::size_t>(cards_[i]);
    const std::size_t card = cards_[j];
    const std::size_t block = stride * card;
    for (std::size_t base = 0; base < table_.size(); base += block)
        for (std::size_t v = 0; v < card; ++v) {
            if (static_cast<int>(v) == value) continue;
            double* p = table_.data() + base + v * stride;
            std::fill(p, p + stride, 0.0);
        }
}

double Potential::sum() const {
    double s = 0.0;
    for (double x : table_) s += x;
    return s;
}

double Potential::normalize() {
    const double s = sum();
    if (s > 0.0)
        for (double& x : table_) x /= s;
    return s;
}

std::vector<std::int32_t> project_map(std::span<const int> from_nodes,
                                      std::span<const int> from_cards,
                                      std::span<const int> to_nodes) {
    const auto strides = sub_strides(from_nodes, from_cards, to_nodes);
    std::vector<std::int32_t> map(table_size(from_cards));
    for_each_cell(from_cards, strides, [&](std::size_t cell, std::size_t sub) {
        map[cell] = static_cast<std::int32_t>(sub);
    });
    return map;
}

std::vector<std::int32_t> ordered_project_map(std::span<const int> from_nodes,
                                              std::span<const int> from_cards,
                                              std::span<const int> query) {
    // Stride of each from-position in the query layout; 0 when summed out.
    std::vector<std::size_t> strides(from_nodes.size(), 0);
    std::size_t stride = 1;
    for (std::size_t i = query.size(); i-- > 0;) {
        auto it = std::lower_bound(from_nodes.begin(), from_nodes.end(),
                                   query[i]);
        assert(it != from_nodes.end() && *it == query[i]);
        const std::size_t j = it - from_nodes.begin();
        strides[j] = stride;
        stride *= static_cast<std::size_t>(from_cards[j]);
    }
    std::vector<std::int32_t> map(table_size(from_cards));
    for_each_cell(from_cards, strides, [&](std::size_t cell, std::size_t sub) {
        map[cell] = static_cast<std::int32_t>(sub);
    });
    return map;
}

std::vector<std::int32_t> value_map(std::span<const int> nodes,
                                    std::span<const int> cards, int node) {
    const int single[1] = {node};
    return project_map(nodes, cards, single);
}

} // namespace dbn
