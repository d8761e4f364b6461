# Copyright 2026 The rdest Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#      http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Generic file utilities."""

import contextlib
import io
import logging
import os
import tempfile


logger = logging.getLogger(__name__)


def read_file(filename, print_error=True):
    """Returns the contents of a text file, or None if it cannot be read."""
    try:
        for encoding in ['utf-8', 'latin1']:
            try:
                with io.open(filename, encoding=encoding) as fp:
                    return fp.read()
            except UnicodeDecodeError:
                pass
    except IOError as exception:
        if print_error:
            logger.error('%s', exception)
        return None


def read_binary(filename):
    with open(filename, 'rb') as fp:
        return fp.read()


@contextlib.contextmanager
def atomic_write(filename, text=False):
    """Yields a file object whose content replaces filename on success.

    The data goes to a temporary file in the same directory which is renamed
    over filename once the block exits cleanly, so readers never observe a
    partial file. On error the temporary file is removed.
    """
    directory = os.path.dirname(os.path.abspath(filename))
    handle, temp_name = tempfile.mkstemp(
        prefix='.' + os.path.basename(filename) + '.', dir=directory)
    try:
        if text:
            fp = io.open(handle, 'w', encoding='utf-8', newline='\n')
        else:
            fp = io.open(handle, 'wb')
        with fp:
            yield fp
        os.chmod(temp_name, 0o644)
        os.replace(temp_name, filename)
    except BaseException:
        if os.path.exists(temp_name):
            os.remove(temp_name)
        raise


def ensure_directory(path):
    if not os.path.isdir(path):
        os.makedirs(path)
    return path
