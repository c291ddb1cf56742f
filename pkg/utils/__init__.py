# -*- coding: utf-8 -*- 