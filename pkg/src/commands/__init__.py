"""
Command implementations for the rdicausal CLI

Every pipeline stage is a module exposing ``cmd_<stage>(args)`` and
``setup_parser(parser)``. The registry keeps their metadata, aliases and
categories so the CLI can build its subcommand parsers from one place.
"""

from enum import Enum
from typing import Any, Callable, Dict, List, Optional


class CommandCategory(Enum):
    """Categories for organizing commands"""
    DATA = "data"             # Producing and preparing datasets
    ANALYSIS = "analysis"     # Weighting and outcome models
    PIPELINE = "pipeline"     # End-to-end runs


class CommandMetadata:
    """Metadata container for command information"""

    def __init__(self,
                 name: str,
                 function: Callable,
                 parser_setup: Callable,
                 category: CommandCategory = CommandCategory.ANALYSIS,
                 description: str = "",
                 aliases: List[str] = None,
                 order: int = 0):
        self.name = name
        self.function = function
        self.parser_setup = parser_setup
        self.category = category
        self.description = description or f"{name} command"
        self.aliases = aliases or []
        # Position of the stage in a full run
        self.order = order

    def to_dict(self) -> Dict[str, Any]:
        return {
            'name': self.name,
            'category': self.category.value,
            'description': self.description,
            'aliases': self.aliases,
            'order': self.order,
        }

    def __repr__(self) -> str:
        return f"CommandMetadata({self.name}, category={self.category.value})"


class CommandRegistry:
    """Registry of pipeline commands with aliases and categories"""

    def __init__(self):
        self._commands: Dict[str, CommandMetadata] = {}
        self._aliases: Dict[str, str] = {}  # alias -> command_name
        self._categories: Dict[CommandCategory, List[str]] = {}
        self._initialized = False

    def register_command(self,
                         name: str,
                         function: Callable,
                         parser_setup: Callable,
                         category: CommandCategory = CommandCategory.ANALYSIS,
                         description: str = "",
                         aliases: List[str] = None,
                         order: int = 0) -> None:
        """
        Register a command

        Args:
            name: Primary command name
            function: Command implementation function
            parser_setup: Argument parser setup function
            category: Command category for organization
            description: Help text description
            aliases: Alternative command names
            order: Position of the stage in a full run

        Raises:
            ValueError: name or alias already taken
        """
        if name in self._commands or name in self._aliases:
            raise ValueError(f"Command '{name}' already registered")
        metadata = CommandMetadata(
            name=name,
            function=function,
            parser_setup=parser_setup,
            category=category,
            description=description,
            aliases=aliases or [],
            order=order,
        )

        for alias in metadata.aliases:
            if alias in self._aliases or alias in self._commands:
                raise ValueError(f"Alias '{alias}' already registered for command '{self._aliases.get(alias, alias)}'")
        self._commands[name] = metadata
        for alias in metadata.aliases:
            self._aliases[alias] = name

        self._categories.setdefault(category, [])
        if name not in self._categories[category]:
            self._categories[category].append(name)

    def get_command(self, name: str) -> Optional[CommandMetadata]:
        """Get command metadata by name or alias"""
        if name in self._commands:
            return self._commands[name]
        if name in self._aliases:
            return self._commands.get(self._aliases[name])
        return None

    def list_commands(self, category: CommandCategory = None) -> List[str]:
        """Command names in pipeline order, optionally of one category"""
        names = self._categories.get(category, []) if category else list(self._commands)
        return sorted(names, key=lambda name: (self._commands[name].order, name))

    def initialize_default_commands(self) -> None:
        """Register the pipeline stages"""
        if self._initialized:
            return

        from .derive import cmd_derive, setup_parser as derive_parser
        from .effects import cmd_effects, setup_parser as effects_parser
        from .fit import cmd_fit, setup_parser as fit_parser
        from .run_all import cmd_all, setup_parser as all_parser
        from .simulate import cmd_simulate, setup_parser as simulate_parser
        from .weights import cmd_weights, setup_parser as weights_parser

        self.register_command(
            name='simulate',
            function=cmd_simulate,
            parser_setup=simulate_parser,
            category=CommandCategory.DATA,
            description='Generate a synthetic dataset with known ground truth',
            aliases=['sim'],
            order=1,
        )
        self.register_command(
            name='derive',
            function=cmd_derive,
            parser_setup=derive_parser,
            category=CommandCategory.DATA,
            description='Select the analysis cohort and derive covariates',
            order=2,
        )
        self.register_command(
            name='weights',
            function=cmd_weights,
            parser_setup=weights_parser,
            category=CommandCategory.ANALYSIS,
            description='Fit weight specifications and report diagnostics',
            aliases=['iptw'],
            order=3,
        )
        self.register_command(
            name='fit',
            function=cmd_fit,
            parser_setup=fit_parser,
            category=CommandCategory.ANALYSIS,
            description='Fit the weighted and unweighted Cox models',
            aliases=['cox'],
            order=4,
        )
        self.register_command(
            name='effects',
            function=cmd_effects,
            parser_setup=effects_parser,
            category=CommandCategory.ANALYSIS,
            description='Estimate CATE curves with bootstrap bounds',
            aliases=['cate'],
            order=5,
        )
        self.register_command(
            name='all',
            function=cmd_all,
            parser_setup=all_parser,
            category=CommandCategory.PIPELINE,
            description='Run every stage in order',
            aliases=['run'],
            order=6,
        )

        self._initialized = True


# Global command registry instance
_registry = CommandRegistry()


def get_registry() -> CommandRegistry:
    """Get the global command registry, registering the stages on first use"""
    _registry.initialize_default_commands()
    return _registry


__all__ = [
    'CommandCategory',
    'CommandMetadata',
    'CommandRegistry',
    'get_registry',
]
