import os
from typing import Dict, List, Optional
from logging import Logger, Formatter, Handler, StreamHandler, DEBUG, \
     INFO, WARN, ERROR, CRITICAL
from enum import Enum

__all__ = ['LogLevel', 'SubpowerLogger', 'getSubpowerLogger',
           'getSubpowerConsoleLogger', 'enableVerbose', 'disableVerbose']

loggers : Dict[str,'SubpowerLogger'] = {}

"""
Controlled vocabulary for the log levels understood by SubpowerLogger and
by the SUBPOWER_LOG_LEVEL environment variable.
"""
class LogLevel(Enum):

    DEBUG = 'DEBUG'
    CRITICAL = 'CRITICAL'
    INFO = 'INFO'
    WARN = 'WARN'
    ERROR = 'ERROR'


"""
SubpowerLogger is the logger used by every subpower module. Closure waves,
designations, oracle rounds and reduction steps are reported at DEBUG, so the
default INFO level keeps library calls quiet.

    Attributes
    ----------
    name : str
        The logger name, prepended to every message
    level : int
        Fixed at DEBUG; filtering happens in the handlers
    handlers : List[Handler]
        1..n logging.Handler objects, by default one StreamHandler named
        'console-handler'
"""
class SubpowerLogger(Logger):

    DEFAULT_LOG_FORMAT = '[%(name)s] Line %(lineno)d %(levelname)s: %(message)s'

    CONSOLE_LOG_FORMAT = ''

    levelMappings = {
        LogLevel.DEBUG: DEBUG,
        LogLevel.INFO: INFO,
        LogLevel.WARN: WARN,
        LogLevel.ERROR: ERROR,
        LogLevel.CRITICAL: CRITICAL
    }

    def __init__(self, name : str, logLevel : Optional[LogLevel]=LogLevel.INFO,
                 handlers : Optional[List[Handler]]=None,
                 logFormat : Optional[str]=DEFAULT_LOG_FORMAT) -> None:
        '''
        Initializes the SubpowerLogger with a name, a handler-level log level,
        a message format and optional handlers

        Parameters
        ----------
        name : str
            The logger name, typically the subpower module name
        logLevel : LogLevel
            Level applied to the default handler, defaults to INFO
        handlers : List[Handler]
            If None, a single StreamHandler named 'console-handler' is created
        logFormat : str
            Format applied to every handler; the empty string leaves the
            handlers' formatters untouched

        Notes
        -----
        The Logger-scoped level is DEBUG so that each handler alone decides
        what gets emitted. Give handlers a name (handler.name = ...) to be able
        to change their level later through changeLogLevel or getHandler.
        '''
        Logger.__init__(self, name=name, level=DEBUG)
        if handlers is None:
            handler = StreamHandler()
            handler.name = 'console-handler'
            handler.setLevel(SubpowerLogger.levelMappings[logLevel])
            handlers = [handler]
        for handler in handlers:
            if logFormat:
                handler.setFormatter(Formatter(logFormat))
            self.addHandler(handler)

    def changeLogLevel(self, level : LogLevel,
                       handlerNames : Optional[List[str]]=None) -> None:
        """
        Changes the log level of all handlers, or only of the named ones

        Parameters
        ----------
        level : LogLevel
            The new level
        handlerNames : List[str]
            Names of the handlers to update; None updates every handler

        Returns
        -------
        None
        """
        newLevel = SubpowerLogger.levelMappings[level]
        for handler in self.handlers:
            if handlerNames is None or handler.name in handlerNames:
                handler.setLevel(newLevel)

    def enableVerbose(self) -> None:
        """
        Sets every handler to DEBUG
        """
        self.changeLogLevel(LogLevel.DEBUG)

    def disableVerbose(self, logLevel : LogLevel=LogLevel.INFO) -> None:
        """
        Sets every handler back to a non-DEBUG level, INFO by default
        """
        self.changeLogLevel(logLevel)

    def getHandler(self, name : str) -> Handler:
        """
        Retrieves the Handler with the given name

        Parameters
        ----------
        name : str
            The handler name

        Returns
        -------
        Handler

        Raises
        ------
        ValueError
            Raised if no configured handler carries the name
        """
        for handler in self.handlers:
            if name == handler.name:
                return handler
        raise ValueError('The name {} does not match any handler'.format(name))


def getSubpowerLogger(name : str, handlers : Optional[List[Handler]]=None,
                      logFormat : Optional[str]=SubpowerLogger.DEFAULT_LOG_FORMAT,
                      logLevel : Optional[LogLevel]=None) -> SubpowerLogger:
    """
    Instantiates a SubpowerLogger whose level defaults to the value of the
    SUBPOWER_LOG_LEVEL env variable (INFO if unset) and registers it so that
    enableVerbose/disableVerbose reach it

    Parameters
    ----------
    name : str
        The logger name
    handlers : List[Handler]
        Optional handlers, see SubpowerLogger
    logFormat : str
        The message format
    logLevel : LogLevel
        Explicit level, overrides SUBPOWER_LOG_LEVEL

    Returns
    -------
    SubpowerLogger

    Raises
    ------
    ValueError
        Raised if SUBPOWER_LOG_LEVEL holds an unknown level name
    """
    if not logLevel:
        logLevel = LogLevel(os.getenv('SUBPOWER_LOG_LEVEL', 'INFO').upper())

    logger = SubpowerLogger(name=name, handlers=handlers, logFormat=logFormat,
                            logLevel=logLevel)
    loggers[logger.name] = logger
    return logger

def getSubpowerConsoleLogger(name : str) -> SubpowerLogger:
    """
    Instantiates a SubpowerLogger writing unformatted messages, for output a
    command-line user reads directly (verdicts, report locations)
    """
    return getSubpowerLogger(name=name, logFormat=SubpowerLogger.CONSOLE_LOG_FORMAT)

def enableVerbose() -> None:
    """
    Enables DEBUG output for every registered SubpowerLogger
    """
    for logger in loggers.values():
        logger.enableVerbose()

def disableVerbose(logLevel : LogLevel=LogLevel.INFO) -> None:
    """
    Disables DEBUG output for every registered SubpowerLogger

    Parameters
    ----------
    logLevel : LogLevel
        The level every logger is reset to, defaults to INFO
    """
    for logger in loggers.values():
        logger.disableVerbose(logLevel)
