"""Exception hierarchy for keymark.

Every library error derives from KeymarkError so callers can catch one base
class. Subclasses also derive from the closest builtin (ValueError for bad
values, IOError for file trouble) to stay idiomatic.
"""


class KeymarkError(Exception):
    pass


# distribution validation
class NegativeEntry(KeymarkError, ValueError):
    pass


class SumNotOne(KeymarkError, ValueError):
    pass


class WrongLength(KeymarkError, ValueError):
    pass


# model building
class EmptyCorpus(KeymarkError, ValueError):
    pass


class EmptySequence(KeymarkError, ValueError):
    pass


# keys
class InvalidSize(KeymarkError, ValueError):
    pass


class CorruptFile(KeymarkError, IOError):
    pass


class VersionMismatch(KeymarkError, IOError):
    pass


class KindMismatch(KeymarkError, ValueError):
    pass


# decoders
class AllZeroMass(KeymarkError, ValueError):
    pass


# generation
class VocabMismatch(KeymarkError, ValueError):
    pass


# alignment
class LengthMismatch(KeymarkError, ValueError):
    pass


class RankOutOfRange(KeymarkError, ValueError):
    pass


class TextTooShort(KeymarkError, ValueError):
    pass


# detection
class InsufficientTexts(KeymarkError, ValueError):
    pass


class ConfigMismatch(KeymarkError, ValueError):
    pass


# attacks
class WouldEmpty(KeymarkError, ValueError):
    pass


class OutOfBounds(KeymarkError, ValueError):
    pass


# experiments
class TooFewValues(KeymarkError, ValueError):
    pass


class ConfigInvalid(KeymarkError, ValueError):
    pass


class ModelMissing(KeymarkError, IOError):
    pass
