#include "cortex/core.hpp"

#include <cmath>
#include <string>

namespace cortex
{

Leak8 leak_code(double tau_ms)
{
    if (!(tau_ms > 0.0) || tau_ms > 30.0)
    {
        throw std::out_of_range("time constant " + std::to_string(tau_ms) +
                " ms outside (0, 30]");
    }
    // round half up
    const double exact = 256.0 * tau_ms / (tau_ms + 1.0);
    const auto code = static_cast<int>(std::floor(exact + 0.5));
    return Leak8{static_cast<std::uint8_t>(std::min(code, 255))};
}

Gain8 Gain8::from_real(double g)
{
    if (!std::isfinite(g))
    {
        throw std::out_of_range("gain must be finite");
    }
    const auto code = static_cast<int>(std::floor(g * 16.0 + 0.5));
    if (code < 1 || code > 255)
    {
        throw std::out_of_range("gain " + std::to_string(g) + " outside [0.0625, 15.9375]");
    }
    return Gain8(code);
}

} // namespace cortex
