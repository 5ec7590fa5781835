"""Physical parameter set of the demon/tape machine.

Two equivalent parametrizations are supported: the bath biases
``(sigma, omega)`` and the thermal bias ``(epsilon, omega)``; the incoming
tape is given either by its bias ``delta = p0 - p1`` or by ``p0``.
Energies are in units of the demon gap and entropies in nats.
"""

from __future__ import annotations

import math
from dataclasses import dataclass


class ParameterError(ValueError):
    """Raised for non-finite, out-of-range or over-determined parameters."""


def epsilon_from_sigma(sigma: float, omega: float) -> float:
    return (omega - sigma) / (1.0 - omega * sigma)


def sigma_from_epsilon(epsilon: float, omega: float) -> float:
    return (omega - epsilon) / (1.0 - omega * epsilon)


def _finite(name: str, value: float) -> float:
    try:
        value = float(value)
    except (TypeError, ValueError) as exc:
        raise ParameterError(f"{name} must be a real number, got {value!r}") from exc
    if not math.isfinite(value):
        raise ParameterError(f"{name} must be finite, got {value!r}")
    return value


@dataclass(frozen=True)
class Params:
    """Rates and tape bias of the machine.

    Parameters
    ----------
    sigma : float
        Hot-bath bias ``tanh(beta_h / 2)``, in ``[0, 1)``.
    omega : float
        Cold-bath bias ``tanh(beta_c / 2)``, in ``[0, 1)``; zero gives the
        fully symmetric machine.
    gamma : float
        Demon intrinsic rate; the cooperative base rate is 1.
    delta : float
        Incoming bit bias ``p0 - p1``, in ``[-1, 1]``.

    Construction with ``sigma >= omega`` is allowed; :attr:`physical` is then
    False (cold bath not colder than the hot one).
    """

    sigma: float
    omega: float
    gamma: float = 1.0
    delta: float = 0.0

    def __post_init__(self):
        sigma = _finite("sigma", self.sigma)
        omega = _finite("omega", self.omega)
        gamma = _finite("gamma", self.gamma)
        delta = _finite("delta", self.delta)
        if not 0.0 <= sigma < 1.0:
            raise ParameterError(f"sigma must lie in [0, 1), got {sigma}")
        if not 0.0 <= omega < 1.0:
            raise ParameterError(f"omega must lie in [0, 1), got {omega}")
        if not gamma > 0.0:
            raise ParameterError(f"gamma must be positive, got {gamma}")
        if not -1.0 <= delta <= 1.0:
            raise ParameterError(f"delta must lie in [-1, 1], got {delta}")
        # normalise to plain floats so equality and hashing behave
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "omega", omega)
        object.__setattr__(self, "gamma", gamma)
        object.__setattr__(self, "delta", delta)

    @classmethod
    def from_epsilon(cls, epsilon: float, omega: float, gamma: float = 1.0,
                     delta: float = 0.0) -> "Params":
        epsilon = _finite("epsilon", epsilon)
        omega = _finite("omega", omega)
        if not -1.0 < epsilon < 1.0:
            raise ParameterError(f"epsilon must lie in (-1, 1), got {epsilon}")
        if not 0.0 <= omega < 1.0:
            raise ParameterError(f"omega must lie in [0, 1), got {omega}")
        if epsilon > omega:
            raise ParameterError(
                f"epsilon={epsilon} exceeds omega={omega}: would need sigma < 0")
        sigma = sigma_from_epsilon(epsilon, omega)
        # sigma = 0 up to roundoff when epsilon == omega
        if -1e-15 < sigma < 0.0:
            sigma = 0.0
        return cls(sigma=sigma, omega=omega, gamma=gamma, delta=delta)

    @classmethod
    def resolve(cls, *, omega: float, sigma: float | None = None,
                epsilon: float | None = None, gamma: float = 1.0,
                delta: float | None = None, p0: float | None = None) -> "Params":
        """Build from either parametrization; over-determined input is rejected."""
        if sigma is not None and epsilon is not None:
            raise ParameterError("give either sigma or epsilon, not both")
        if delta is not None and p0 is not None:
            raise ParameterError("give either delta or p0, not both")
        if p0 is not None:
            p0 = _finite("p0", p0)
            if not 0.0 <= p0 <= 1.0:
                raise ParameterError(f"p0 must lie in [0, 1], got {p0}")
            delta = 2.0 * p0 - 1.0
        if delta is None:
            delta = 0.0
        if epsilon is not None:
            return cls.from_epsilon(epsilon, omega, gamma=gamma, delta=delta)
        if sigma is None:
            raise ParameterError("one of sigma or epsilon is required")
        return cls(sigma=sigma, omega=omega, gamma=gamma, delta=delta)

    @property
    def epsilon(self) -> float:
        return epsilon_from_sigma(self.sigma, self.omega)

    @property
    def p0_bit(self) -> float:
        return 0.5 * (1.0 + self.delta)

    @property
    def beta_delta(self) -> float:
        """(beta_c - beta_h) times the demon gap."""
        return 2.0 * math.atanh(self.epsilon)

    @property
    def eta_carnot(self) -> float:
        # undefined for a symmetric cold bath
        if self.omega == 0.0:
            return math.nan
        return math.atanh(self.epsilon) / math.atanh(self.omega)

    @property
    def physical(self) -> bool:
        return self.omega > self.sigma

    def replace(self, **changes) -> "Params":
        fields = dict(sigma=self.sigma, omega=self.omega, gamma=self.gamma,
                      delta=self.delta)
        fields.update(changes)
        return Params(**fields)
