import math

from django.core.exceptions import ValidationError
from django.core.validators import BaseValidator, MinValueValidator, RegexValidator
from django.utils.deconstruct import deconstructible
from django.utils.translation import gettext_lazy as _

# MPS tokens are whitespace separated, so names cannot contain blanks.
MPS_NAME_MAX_LENGTH = 255


@deconstructible
class PositiveValueValidator(MinValueValidator):
    message = _("must be > %(limit_value)s")
    code = "min_value"
    limit_value = 0

    def __init__(self, message=None):
        super().__init__(self.limit_value, message)

    def compare(self, a, b):
        return a <= b


@deconstructible
class NonNegativeValueValidator(MinValueValidator):
    message = _("must be >= %(limit_value)s")
    code = "min_value"

    def __init__(self, message=None):
        super().__init__(0, message)


@deconstructible
class FractionValidator(BaseValidator):
    """Efficiencies: 0 < value <= 1."""

    message = _("must be in (0, 1]")
    code = "fraction"

    def __init__(self, message=None):
        super().__init__(1, message)

    def compare(self, a, b):
        return not (0 < a <= b)


@deconstructible
class HalfOpenFractionValidator(BaseValidator):
    """Loss fractions: 0 <= value < 1."""

    message = _("must be in [0, 1)")
    code = "fraction"

    def __init__(self, message=None):
        super().__init__(1, message)

    def compare(self, a, b):
        return not (0 <= a < b)


@deconstructible
class FiniteValueValidator:
    message = _("must be a finite number")
    code = "finite"

    def __call__(self, value):
        if not isinstance(value, (int, float)) or not math.isfinite(value):
            raise ValidationError(self.message, code=self.code, params={"value": value})

    def __eq__(self, other):
        return isinstance(other, FiniteValueValidator)


@deconstructible
class SeriesLengthValidator(BaseValidator):
    message = _("has length %(show_value)s but the horizon is %(limit_value)s")
    code = "length_mismatch"

    def clean(self, x):
        return len(x)

    def compare(self, a, b):
        return a != b


@deconstructible
class NonNegativeSeriesValidator:
    message = _("must be >= 0 at step %(step)s")
    code = "negative_entry"

    def __call__(self, value):
        for step, entry in enumerate(value):
            if not math.isfinite(entry) or entry < 0:
                raise ValidationError(self.message, code=self.code, params={"value": entry, "step": step})

    def __eq__(self, other):
        return isinstance(other, NonNegativeSeriesValidator)


@deconstructible
class MpsNameValidator(RegexValidator):
    message = _("MPS names must be 1-255 characters without whitespace.")
    code = "invalid_name"
    regex = r"^\S{1,%d}$" % MPS_NAME_MAX_LENGTH

    def __call__(self, value):
        if not isinstance(value, str):
            raise ValidationError(self.message, code=self.code, params={"value": value})
        super().__call__(value)


validate_mps_name = MpsNameValidator()


@deconstructible
class ParticipantIdValidator(RegexValidator):
    """Prosumer ids end up in file names, so only a safe character set is allowed."""

    message = _("Ids may only contain letters, digits, '.', '_' and '-'.")
    code = "invalid_id"
    regex = r"^[A-Za-z0-9][A-Za-z0-9._-]{0,63}$"


validate_participant_id = ParticipantIdValidator()
