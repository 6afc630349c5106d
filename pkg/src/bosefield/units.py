"""Conversion between laboratory units and oscillator units.

The trap frequency is given as a cyclic frequency f; the oscillator scales use
omega = 2 pi f. Lengths are in l = sqrt(hbar / (m omega)), energies in hbar omega and
temperatures in hbar omega / k_B.
"""

import math
from typing import Any, Type

import pint
from pydantic import GetCoreSchemaHandler, SerializationInfo
from pydantic_core import core_schema

from bosefield.exceptions import BFInvalidParameter
from bosefield.models import BoseFieldBaseModel

ureg = pint.UnitRegistry()

RUBIDIUM_87_MASS_DALTON = 86.909180527


class BaseQuantity(ureg.Quantity):  # type: ignore
    """Pint quantity with a fixed dimensionality usable as a pydantic field."""

    __base_unit__ = None
    _REGISTRY = ureg

    def __new__(cls: Type["BaseQuantity"], value, units=None):
        return super().__new__(cls, value, units)  # type: ignore

    def __init_subclass__(cls, **kwargs):
        if not cls.__base_unit__:
            msg = "__base_unit__ should be defined"
            raise TypeError(msg)
        super().__init_subclass__(**kwargs)

    @classmethod
    def __get_pydantic_core_schema__(
        cls, _: Type["BaseQuantity"], handler: GetCoreSchemaHandler
    ) -> core_schema.CoreSchema:
        return core_schema.with_info_after_validator_function(
            cls._validate,
            core_schema.any_schema(),
            field_name=handler.field_name,
            serialization=core_schema.plain_serializer_function_ser_schema(
                cls._serialize,
                info_arg=True,
                return_schema=core_schema.any_schema(),
            ),
        )

    @classmethod
    def _validate(cls, value: Any, _: core_schema.ValidationInfo) -> "BaseQuantity":
        return cls.coerce(value)

    @classmethod
    def coerce(cls, value: Any) -> "BaseQuantity":
        """Return `value` as this quantity; bare numbers are taken in the base unit."""
        if isinstance(value, str):
            value = ureg.Quantity(value)
        if isinstance(value, pint.Quantity):
            if not value.check(cls.__base_unit__):
                msg = f"Unit {value.units} must be compatible with {cls.__base_unit__}"
                raise ValueError(msg)
            return cls(value.magnitude, value.units)
        return cls(value, cls.__base_unit__)

    @classmethod
    def _serialize(cls, value, info: SerializationInfo) -> float | str:
        if info.mode == "json":
            return str(value)
        return value


# ruff:noqa: E701
# fmt: off

class Mass(BaseQuantity): __base_unit__ = "kilogram"

class Frequency(BaseQuantity): __base_unit__ = "hertz"

class Length(BaseQuantity): __base_unit__ = "meter"

class Energy(BaseQuantity): __base_unit__ = "joule"

class Temperature(BaseQuantity): __base_unit__ = "kelvin"

# fmt: on


class OscillatorScales(BoseFieldBaseModel):
    """Length, energy and temperature units of a harmonic trap."""

    mass: Mass
    trap_frequency: Frequency
    length: Length
    energy: Energy
    temperature: Temperature


def oscillator_scales(
    mass: pint.Quantity | str, trap_frequency: pint.Quantity | str
) -> OscillatorScales:
    """Return the oscillator units for an atom of `mass` in a trap of cyclic frequency f."""
    mass = Mass.coerce(mass)
    trap_frequency = Frequency.coerce(trap_frequency)
    if mass.magnitude <= 0 or trap_frequency.magnitude <= 0:
        msg = f"Mass and trap frequency must be positive, got {mass} and {trap_frequency}"
        raise BFInvalidParameter(msg)
    omega = 2.0 * math.pi * trap_frequency
    energy = (ureg.hbar * omega).to("joule")
    return OscillatorScales(
        mass=mass,
        trap_frequency=trap_frequency,
        length=(ureg.hbar / (mass * omega)) ** 0.5,
        energy=energy,
        temperature=(energy / ureg.boltzmann_constant).to("kelvin"),
    )


def to_oscillator_temperature(
    temperature: pint.Quantity | str, scales: OscillatorScales
) -> float:
    """Return k_B T / (hbar omega)."""
    temperature = Temperature.coerce(temperature)
    return float((temperature / scales.temperature).to("dimensionless").magnitude)


def coupling_from_scattering_length(
    scattering_length: pint.Quantity | str,
    transverse_frequency: pint.Quantity | str,
    scales: OscillatorScales,
) -> float:
    """Return the 1D coupling g = 2 hbar omega_perp a in units of hbar omega l.

    The transverse trap frequency is cyclic, like the axial one.
    """
    length = Length.coerce(scattering_length)
    frequency = Frequency.coerce(transverse_frequency)
    omega_perp = 2.0 * math.pi * frequency
    coupling = 2.0 * ureg.hbar * omega_perp * length
    return float((coupling / (scales.energy * scales.length)).to("dimensionless").magnitude)


def rubidium_87_mass() -> pint.Quantity:
    return ureg.Quantity(RUBIDIUM_87_MASS_DALTON, "dalton").to("kilogram")
