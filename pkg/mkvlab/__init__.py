#    This file is part of mkvlab
#
#    mkvlab is free software: you can redistribute it and/or modify
#    it under the terms of the GNU General Public License as published by
#    the Free Software Foundation, either version 3 of the License, or
#    (at your option) any later version.
#
#    mkvlab is distributed in the hope that it will be useful,
#    but WITHOUT ANY WARRANTY; without even the implied warranty of
#    MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
#    GNU General Public License for more details.
#
#    You should have received a copy of the GNU General Public License
#    along with mkvlab.  If not, see <http://www.gnu.org/licenses/>.

__version__ = "0.3.0"

import functools
import logging

# HACK: add a trace log level for even more noisy debugging stuff
if not hasattr(logging, "trace"):
    logging.addLevelName(5, "TRACE")
    logging.trace = functools.partial(logging.log, 5)
