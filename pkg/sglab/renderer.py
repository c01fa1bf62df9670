from __future__ import annotations

from dataclasses import dataclass, field
from typing import List

from rich.console import Console, ConsoleRenderable
from rich.table import Table
from rich.text import Text

from sglab.message import InternalMessage, Source, Verbosity


@dataclass
class Renderer:
    verbosity: Verbosity = Verbosity.INFO

    def emit(self, message: InternalMessage) -> None:
        if message.verbosity >= self.verbosity:
            self.handle_internal_message(message)

    def handle_internal_message(self, message: InternalMessage) -> None:
        pass

    def debug(self, text: str, source: Source = Source.CLI) -> None:
        self.emit(InternalMessage(text, verbosity=Verbosity.DEBUG, source=source))

    def info(self, text: str, source: Source = Source.CLI) -> None:
        self.emit(InternalMessage(text, verbosity=Verbosity.INFO, source=source))

    def warning(self, text: str, source: Source = Source.CLI) -> None:
        self.emit(InternalMessage(text, verbosity=Verbosity.WARNING, source=source))

    def error(self, text: str, source: Source = Source.CLI) -> None:
        self.emit(InternalMessage(text, verbosity=Verbosity.ERROR, source=source))


@dataclass
class NullRenderer(Renderer):
    pass


@dataclass
class RecordingRenderer(Renderer):
    """Keeps every emitted message, e.g. to inspect the warnings a run produced."""

    messages: List[InternalMessage] = field(default_factory=list)

    def handle_internal_message(self, message: InternalMessage) -> None:
        self.messages.append(message)


@dataclass
class LogRenderer(Renderer):
    console: Console = field(default_factory=lambda: Console(stderr=True))

    internal_prefix: str = "{timestamp:%H:%M:%S.%f} {source} "
    internal_prefix_style: str = "dim"
    internal_message_style: str = ""
    warning_style: str = "yellow"

    def handle_internal_message(self, message: InternalMessage) -> None:
        self.console.print(self.render_internal_message(message), soft_wrap=True)

    def render_internal_message(self, message: InternalMessage) -> ConsoleRenderable:
        prefix = Text.from_markup(
            self.internal_prefix.format_map(
                {"timestamp": message.timestamp, "source": message.source.value}
            ),
            style=self.internal_prefix_style,
        )
        body = Text(
            message.text,
            style=self.warning_style
            if message.verbosity >= Verbosity.WARNING
            else self.internal_message_style,
        )

        g = Table.grid()
        g.add_row(prefix, body)

        return g

