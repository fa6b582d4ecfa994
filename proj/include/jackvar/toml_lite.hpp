#pragma once

// Reader for the subset of TOML used by experiment configs: comments, [table]
// headers, bare keys, and values that are strings, integers, floats, booleans,
// or (possibly multi-line) arrays of those.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "jackvar/errors.hpp"

namespace jackvar::toml {

struct Value;
using Array = std::vector<Value>;

struct Value {
    std::variant<bool, std::int64_t, double, std::string, Array> data;
    std::size_t line = 0;

    bool is_string() const { return std::holds_alternative<std::string>(data); }
    bool is_integer() const { return std::holds_alternative<std::int64_t>(data); }
    bool is_float() const { return std::holds_alternative<double>(data); }
    bool is_array() const { return std::holds_alternative<Array>(data); }
    bool is_bool() const { return std::holds_alternative<bool>(data); }
};

using Table = std::map<std::string, Value>;

/// Top-level keys live under "".
struct Document {
    std::map<std::string, Table> tables;

    const Table* table(const std::string& name) const {
        const auto it = tables.find(name);
        return it == tables.end() ? nullptr : &it->second;
    }
};

namespace detail {

class Parser {
public:
    explicit Parser(std::string_view text) : text_(text) {}

    Document parse() {
        Document doc;
        doc.tables[""];
        std::string current;
        while (true) {
            skip_blank_and_comments();
            if (eof()) break;
            if (peek() == '[') {
                ++pos_;
                skip_inline_ws();
                current = parse_key();
                skip_inline_ws();
                expect(']');
                if (doc.tables.count(current) && current != "") fail("duplicate table [" + current + "]");
                doc.tables[current];
                end_of_line();
                continue;
            }
            const std::string key = parse_key();
            skip_inline_ws();
            expect('=');
            skip_inline_ws();
            Value v = parse_value();
            auto& tbl = doc.tables[current];
            if (tbl.count(key)) fail("duplicate key '" + key + "'");
            tbl.emplace(key, std::move(v));
            end_of_line();
        }
        return doc;
    }

private:
    bool eof() const { return pos_ >= text_.size(); }
    char peek() const { return text_[pos_]; }

    [[noreturn]] void fail(const std::string& msg) const {
        throw input_error("config line " + std::to_string(line_) + ": " + msg);
    }

    void expect(char c) {
        if (eof() || peek() != c) fail(std::string("expected '") + c + "'");
        ++pos_;
    }

    void skip_inline_ws() {
        while (!eof() && (peek() == ' ' || peek() == '\t')) ++pos_;
    }

    void skip_comment() {
        if (!eof() && peek() == '#')
            while (!eof() && peek() != '\n') ++pos_;
    }

    void skip_blank_and_comments() {
        while (!eof()) {
            skip_inline_ws();
            skip_comment();
            if (eof()) return;
            if (peek() == '\r') {
                ++pos_;
                continue;
            }
            if (peek() == '\n') {
                ++pos_;
                ++line_;
                continue;
            }
            return;
        }
    }

    void end_of_line() {
        skip_inline_ws();
        skip_comment();
        if (!eof() && peek() == '\r') ++pos_;
        if (eof()) return;
        if (peek() != '\n') fail("unexpected trailing characters");
        ++pos_;
        ++line_;
    }

    std::string parse_key() {
        const std::size_t start = pos_;
        while (!eof()) {
            const char c = peek();
            if ((c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' || c == '-')
                ++pos_;
            else
                break;
        }
        if (pos_ == start) fail("expected a key");
        return std::string(text_.substr(start, pos_ - start));
    }

    Value parse_value() {
        if (eof()) fail("missing value");
        Value v;
        v.line = line_;
        const char c = peek();
        if (c == '"') {
            v.data = parse_string();
        } else if (c == '[') {
            v.data = parse_array();
        } else if (text_.substr(pos_).starts_with("true")) {
            pos_ += 4;
            v.data = true;
        } else if (text_.substr(pos_).starts_with("false")) {
            pos_ += 5;
            v.data = false;
        } else {
            parse_number(v);
        }
        return v;
    }

    std::string parse_string() {
        expect('"');
        std::string out;
        while (true) {
            if (eof() || peek() == '\n') fail("unterminated string");
            const char c = text_[pos_++];
            if (c == '"') break;
            if (c == '\\') {
                if (eof()) fail("unterminated string");
                const char e = text_[pos_++];
                switch (e) {
                case '"': out += '"'; break;
                case '\\': out += '\\'; break;
                case 'n': out += '\n'; break;
                case 't': out += '\t'; break;
                default: fail(std::string("unsupported escape \\") + e);
                }
            } else {
                out += c;
            }
        }
        return out;
    }

    Array parse_array() {
        expect('[');
        Array out;
        while (true) {
            skip_blank_and_comments();
            if (eof()) fail("unterminated array");
            if (peek() == ']') {
                ++pos_;
                return out;
            }
            out.push_back(parse_value());
            skip_blank_and_comments();
            if (eof()) fail("unterminated array");
            if (peek() == ',') {
                ++pos_;
                continue;
            }
            if (peek() != ']') fail("expected ',' or ']' in array");
        }
    }

    void parse_number(Value& v) {
        const std::size_t start = pos_;
        while (!eof()) {
            const char c = peek();
            if ((c >= '0' && c <= '9') || c == '+' || c == '-' || c == '.' || c == 'e' || c == 'E' || c == '_')
                ++pos_;
            else
                break;
        }
        std::string token;
        for (char c : text_.substr(start, pos_ - start))
            if (c != '_') token += c;
        if (token.empty()) fail("expected a value");
        std::string_view tv(token);
        if (tv.front() == '+') tv.remove_prefix(1);
        const bool is_float = tv.find_first_of(".eE") != std::string_view::npos;
        if (!is_float) {
            std::int64_t i = 0;
            const auto [ptr, ec] = std::from_chars(tv.data(), tv.data() + tv.size(), i);
            if (ec == std::errc() && ptr == tv.data() + tv.size()) {
                v.data = i;
                return;
            }
            fail("invalid integer '" + token + "'");
        }
        double d = 0.0;
        const auto [ptr, ec] = std::from_chars(tv.data(), tv.data() + tv.size(), d);
        if (ec != std::errc() || ptr != tv.data() + tv.size() || !std::isfinite(d)) fail("invalid number '" + token + "'");
        v.data = d;
    }

    std::string_view text_;
    std::size_t pos_ = 0;
    std::size_t line_ = 1;
};

} // namespace detail

inline Document parse(std::string_view text) { return detail::Parser(text).parse(); }

} // namespace jackvar::toml
