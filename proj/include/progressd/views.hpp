// Camera views and view masks. The fixed order left, central, right is the
// concatenation order used everywhere downstream.
#pragma once

#include <array>
#include <string>
#include <vector>

#include "progressd/common.hpp"

namespace progressd {

enum class View : int { left = 0, central = 1, right = 2 };

inline constexpr std::array<View, 3> kAllViews = {View::left, View::central,
                                                  View::right};

inline const char* view_name(View v) {
    switch (v) {
        case View::left: return "left";
        case View::central: return "central";
        case View::right: return "right";
    }
    fail("unknown view id ", static_cast<int>(v));
}

inline View view_from_name(const std::string& name) {
    for (View v : kAllViews)
        if (name == view_name(v)) return v;
    fail("unknown view '", name, "' (expected left, central or right)");
}

struct ViewMask {
    std::array<bool, 3> active = {true, true, true};

    static ViewMask all() { return {}; }
    static ViewMask single(View v) {
        ViewMask m;
        m.active = {false, false, false};
        m.set(v, true);
        return m;
    }

    bool operator[](View v) const { return active[static_cast<int>(v)]; }
    void set(View v, bool on) { active[static_cast<int>(v)] = on; }
    int count() const { return active[0] + active[1] + active[2]; }
    bool operator==(const ViewMask&) const = default;

    std::vector<View> views() const {
        std::vector<View> out;
        for (View v : kAllViews)
            if ((*this)[v]) out.push_back(v);
        return out;
    }

    // "left,central,right" and friends; used by config files and the cli
    static ViewMask parse(const std::string& text) {
        ViewMask m;
        m.active = {false, false, false};
        std::string token;
        auto flush = [&] {
            if (token.empty()) return;
            View v = view_from_name(token);
            check(!m[v], "view mask names '", token, "' twice");
            m.set(v, true);
            token.clear();
        };
        for (char c : text) {
            if (c == ',') flush();
            else if (c != ' ') token += c;
        }
        flush();
        check(m.count() > 0, "view mask '", text, "' selects no views");
        return m;
    }

    std::string str() const {
        std::string out;
        for (View v : kAllViews) {
            if (!(*this)[v]) continue;
            if (!out.empty()) out += ",";
            out += view_name(v);
        }
        return out;
    }
};

} // namespace progressd
