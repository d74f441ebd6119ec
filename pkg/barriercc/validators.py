from typing import Any, Optional, Union, get_args, get_origin

from msgspec import DecodeError, ValidationError, inspect, json, structs


def _is_requires_double_quotes(t: Any) -> bool:
    ti = inspect.type_info(t)
    if isinstance(ti, (inspect.StrType, inspect.LiteralType)):
        return all(isinstance(v, str) for v in getattr(ti, "values", ("",)))
    return False


def _strip_optional(t: Any) -> tuple[Any, bool]:
    if get_origin(t) is Union:
        args = [a for a in get_args(t) if a is not type(None)]
        if len(args) < len(get_args(t)):
            return (args[0] if len(args) == 1 else Union[tuple(args)]), True
    return t, False


class Validator:
    """
    Turns the text of a `FIELD=VALUE` override into a value of the field's annotated type.

    Numbers, lists and booleans are read as JSON; string-like fields accept bare words.
    """

    def __init__(self, name: str, field_type: Any) -> None:
        self.name = name
        self.field_type = field_type
        inner, self.is_optional = _strip_optional(field_type)
        self.requires_double_quotes = _is_requires_double_quotes(inner)
        self.decoder = json.Decoder(field_type)

    def validate(self, value: str) -> tuple[bool, Any]:
        err = False
        if self.is_optional and value.lower() in ("null", "none", ""):
            return err, None
        text = value
        if self.requires_double_quotes and not value.startswith('"'):
            text = json.encode(value).decode()
        try:
            rv = self.decoder.decode(text)
        except (ValidationError, DecodeError) as e:
            rv = str(e)
            err = True
        return err, rv


def field_validators(struct_type: type) -> dict[str, Validator]:
    """
    One validator per field of a struct type, keyed by the encoded field name.
    """
    validators = {}
    for f in structs.fields(struct_type):
        validators[f.encode_name] = Validator(f.encode_name, f.type)
    return validators


def parse_assignment(text: str) -> tuple[str, str]:
    name, sep, value = text.partition("=")
    name = name.strip()
    if not sep or not name:
        raise ValueError(f"expected FIELD=VALUE, got {text!r}")
    return name, value.strip()


def find_validator(validators: dict[str, Validator], name: str) -> Optional[Validator]:
    return validators.get(name) or validators.get(name.replace("-", "_"))
